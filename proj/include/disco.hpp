#pragma once

#include "disco/box_features.hpp"
#include "disco/classification.hpp"
#include "disco/error.hpp"
#include "disco/feature_matrix.hpp"
#include "disco/hard_sampling.hpp"
#include "disco/io.hpp"
#include "disco/pca.hpp"
#include "disco/pipeline.hpp"
#include "disco/rank_eval.hpp"
#include "disco/regression.hpp"
#include "disco/spectral.hpp"
#include "disco/synthetic.hpp"
