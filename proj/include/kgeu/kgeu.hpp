#pragma once

#include "kgeu/adam.hpp"
#include "kgeu/baselines.hpp"
#include "kgeu/embedding.hpp"
#include "kgeu/error.hpp"
#include "kgeu/evaluation.hpp"
#include "kgeu/graph.hpp"
#include "kgeu/graphdpo.hpp"
#include "kgeu/losses.hpp"
#include "kgeu/preference.hpp"
#include "kgeu/pretrain.hpp"
#include "kgeu/random.hpp"
#include "kgeu/splits.hpp"
#include "kgeu/synthetic.hpp"
#include "kgeu/theory.hpp"
