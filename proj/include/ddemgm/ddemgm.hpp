#pragma once

#include "ddemgm/actors.hpp"
#include "ddemgm/bench.hpp"
#include "ddemgm/classifier.hpp"
#include "ddemgm/csv.hpp"
#include "ddemgm/dataset.hpp"
#include "ddemgm/embedding.hpp"
#include "ddemgm/error.hpp"
#include "ddemgm/eval.hpp"
#include "ddemgm/mgm.hpp"
#include "ddemgm/model_io.hpp"
#include "ddemgm/params.hpp"
#include "ddemgm/ring_buffer.hpp"
#include "ddemgm/signal.hpp"
