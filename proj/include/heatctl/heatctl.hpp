#pragma once

#include "heatctl/errors.hpp"
#include "heatctl/spectral.hpp"
#include "heatctl/trajectory.hpp"
#include "heatctl/bvp.hpp"
#include "heatctl/norm_search.hpp"
#include "heatctl/time_search.hpp"
#include "heatctl/feedback.hpp"
#include "heatctl/config.hpp"
#include "heatctl/verify.hpp"
#include "heatctl/io.hpp"
