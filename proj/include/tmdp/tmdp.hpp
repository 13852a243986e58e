#pragma once

#include "tmdp/candidates.hpp"
#include "tmdp/convexhull.hpp"
#include "tmdp/distance.hpp"
#include "tmdp/error.hpp"
#include "tmdp/format.hpp"
#include "tmdp/hardcase.hpp"
#include "tmdp/instances.hpp"
#include "tmdp/learners.hpp"
#include "tmdp/mdp.hpp"
#include "tmdp/mdp_json.hpp"
#include "tmdp/planning.hpp"
#include "tmdp/rng.hpp"
#include "tmdp/sailing.hpp"
#include "tmdp/sampling.hpp"
#include "tmdp/transfer.hpp"
