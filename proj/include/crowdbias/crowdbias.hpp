#pragma once

#include "crowdbias/error.hpp"
#include "crowdbias/linalg.hpp"
#include "crowdbias/random.hpp"
#include "crowdbias/corpus.hpp"
#include "crowdbias/embedding.hpp"
#include "crowdbias/model.hpp"
#include "crowdbias/optim.hpp"
#include "crowdbias/truth.hpp"
#include "crowdbias/analysis.hpp"
#include "crowdbias/pipeline.hpp"
