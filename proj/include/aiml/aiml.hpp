#pragma once

// Umbrella header.

#include "aiml/aim.hpp"
#include "aiml/coarse_case.hpp"
#include "aiml/coarse_data.hpp"
#include "aiml/coarsen_gen.hpp"
#include "aiml/conservative.hpp"
#include "aiml/dataset_io.hpp"
#include "aiml/em.hpp"
#include "aiml/errors.hpp"
#include "aiml/eval.hpp"
#include "aiml/experiment.hpp"
#include "aiml/inference.hpp"
#include "aiml/likelihoods.hpp"
#include "aiml/network.hpp"
#include "aiml/network_io.hpp"
#include "aiml/rng.hpp"
