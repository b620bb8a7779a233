#pragma once

#include "crfmm/crf.hpp"
#include "crfmm/error.hpp"
#include "crfmm/evaluation.hpp"
#include "crfmm/features.hpp"
#include "crfmm/geometry.hpp"
#include "crfmm/lbfgs.hpp"
#include "crfmm/matcher.hpp"
#include "crfmm/network_io.hpp"
#include "crfmm/parallel.hpp"
#include "crfmm/road_network.hpp"
#include "crfmm/route_preference.hpp"
#include "crfmm/synthetic.hpp"
#include "crfmm/time_slot.hpp"
#include "crfmm/trajectory.hpp"
#include "crfmm/trajectory_io.hpp"
