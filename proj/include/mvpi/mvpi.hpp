#pragma once

#include "mvpi/autograd.hpp"
#include "mvpi/backbone.hpp"
#include "mvpi/bench.hpp"
#include "mvpi/checkpoint.hpp"
#include "mvpi/config.hpp"
#include "mvpi/core.hpp"
#include "mvpi/eval.hpp"
#include "mvpi/integrator.hpp"
#include "mvpi/losses.hpp"
#include "mvpi/manifest.hpp"
#include "mvpi/model.hpp"
#include "mvpi/params.hpp"
#include "mvpi/prompts.hpp"
#include "mvpi/runner.hpp"
#include "mvpi/space.hpp"
#include "mvpi/stats.hpp"
#include "mvpi/synthetic.hpp"
#include "mvpi/train.hpp"
#include "mvpi/vocab.hpp"
