#pragma once

#include "icl/backend.hpp"
#include "icl/bm25.hpp"
#include "icl/cache.hpp"
#include "icl/concurrency.hpp"
#include "icl/corpus.hpp"
#include "icl/dataset_io.hpp"
#include "icl/errors.hpp"
#include "icl/eval.hpp"
#include "icl/hash.hpp"
#include "icl/prompt.hpp"
#include "icl/report.hpp"
#include "icl/rng.hpp"
#include "icl/run_config.hpp"
#include "icl/scorer.hpp"
#include "icl/synth.hpp"
#include "icl/tokenizer.hpp"
#include "icl/unicode.hpp"
