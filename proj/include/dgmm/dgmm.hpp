#pragma once

// Umbrella header for the deep generative multiview model library.

#include "dgmm/config.hpp"
#include "dgmm/csv.hpp"
#include "dgmm/dataset.hpp"
#include "dgmm/elbo.hpp"
#include "dgmm/errors.hpp"
#include "dgmm/linalg.hpp"
#include "dgmm/metrics.hpp"
#include "dgmm/mlp.hpp"
#include "dgmm/model_io.hpp"
#include "dgmm/optimizer.hpp"
#include "dgmm/parallel.hpp"
#include "dgmm/pgm.hpp"
#include "dgmm/predictor.hpp"
#include "dgmm/prob.hpp"
#include "dgmm/random.hpp"
#include "dgmm/screening.hpp"
#include "dgmm/synthetic.hpp"
#include "dgmm/trainer.hpp"
#include "dgmm/vb.hpp"
