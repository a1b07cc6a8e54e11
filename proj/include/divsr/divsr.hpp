#pragma once

#include "divsr/adam.hpp"
#include "divsr/checkpoint.hpp"
#include "divsr/config.hpp"
#include "divsr/data.hpp"
#include "divsr/error.hpp"
#include "divsr/experiments.hpp"
#include "divsr/losses.hpp"
#include "divsr/metrics.hpp"
#include "divsr/model.hpp"
#include "divsr/rerank.hpp"
#include "divsr/synthetic.hpp"
#include "divsr/trainer.hpp"
