#pragma once

#include "zsl/checkpoint.hpp"
#include "zsl/dataset.hpp"
#include "zsl/errors.hpp"
#include "zsl/evaluator.hpp"
#include "zsl/network.hpp"
#include "zsl/random.hpp"
#include "zsl/semantic_space.hpp"
#include "zsl/trainer.hpp"
#include "zsl/zslf.hpp"
