#pragma once

#include "petal/candidates.hpp"
#include "petal/error.hpp"
#include "petal/evaluate.hpp"
#include "petal/losses.hpp"
#include "petal/matrix_io.hpp"
#include "petal/parallel.hpp"
#include "petal/probability.hpp"
#include "petal/rng.hpp"
#include "petal/search.hpp"
#include "petal/synth.hpp"
#include "petal/types.hpp"
