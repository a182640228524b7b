#pragma once

#include "chaptering.hpp"
#include "clustering.hpp"
#include "corpus.hpp"
#include "datasets.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "learners.hpp"
#include "metrics.hpp"
#include "ordering.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "random.hpp"
#include "selection.hpp"
#include "stats.hpp"
#include "synth.hpp"
#include "text.hpp"
#include "text_util.hpp"
