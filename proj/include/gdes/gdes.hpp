#pragma once

#include "gdes/datagen.hpp"
#include "gdes/dgnn.hpp"
#include "gdes/evalmetrics.hpp"
#include "gdes/io.hpp"
#include "gdes/matrix.hpp"
#include "gdes/nhpe.hpp"
#include "gdes/rng.hpp"
#include "gdes/smoothing.hpp"
#include "gdes/temporal_graph.hpp"
#include "gdes/trainer.hpp"
