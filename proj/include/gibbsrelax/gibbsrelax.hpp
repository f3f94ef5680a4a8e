#pragma once

#include "gibbsrelax/common.hpp"
#include "gibbsrelax/distribution.hpp"
#include "gibbsrelax/info.hpp"
#include "gibbsrelax/local_family.hpp"
#include "gibbsrelax/meanfield.hpp"
#include "gibbsrelax/model.hpp"
#include "gibbsrelax/model_io.hpp"
#include "gibbsrelax/rng.hpp"
#include "gibbsrelax/rounding.hpp"
#include "gibbsrelax/sa_solver.hpp"
#include "gibbsrelax/simplex.hpp"
#include "gibbsrelax/spinglass.hpp"
#include "gibbsrelax/subsample.hpp"
