#pragma once

#include "dcm/actions.hpp"
#include "dcm/bloom_filter.hpp"
#include "dcm/controller.hpp"
#include "dcm/count_min.hpp"
#include "dcm/data_plane.hpp"
#include "dcm/error.hpp"
#include "dcm/experiments.hpp"
#include "dcm/flow_key.hpp"
#include "dcm/hash.hpp"
#include "dcm/sampling.hpp"
#include "dcm/topology.hpp"
#include "dcm/trace.hpp"
#include "dcm/two_stage_filter.hpp"
#include "dcm/types.hpp"
