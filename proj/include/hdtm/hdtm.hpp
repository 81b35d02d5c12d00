#pragma once

#include "hdtm/dataset.hpp"
#include "hdtm/errors.hpp"
#include "hdtm/estimator.hpp"
#include "hdtm/io.hpp"
#include "hdtm/lasso.hpp"
#include "hdtm/moment.hpp"
#include "hdtm/nuisance.hpp"
#include "hdtm/simulate.hpp"
#include "hdtm/stats.hpp"
#include "hdtm/transform.hpp"
#include "hdtm/version.hpp"
