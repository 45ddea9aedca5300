#pragma once

#include <latefit/attention.hpp>
#include <latefit/backbone.hpp>
#include <latefit/cache.hpp>
#include <latefit/checkpoint.hpp>
#include <latefit/dataset.hpp>
#include <latefit/document.hpp>
#include <latefit/encoder.hpp>
#include <latefit/error.hpp>
#include <latefit/losses.hpp>
#include <latefit/metrics.hpp>
#include <latefit/mlp.hpp>
#include <latefit/model.hpp>
#include <latefit/parallel.hpp>
#include <latefit/pipeline.hpp>
#include <latefit/params.hpp>
#include <latefit/rng.hpp>
#include <latefit/sampler.hpp>
#include <latefit/stats.hpp>
#include <latefit/synthetic.hpp>
#include <latefit/trainer.hpp>
