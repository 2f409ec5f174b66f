#pragma once

#include "depcause/errors.hpp"
#include "depcause/tensor.hpp"
#include "depcause/ops.hpp"
#include "depcause/gradcheck.hpp"
#include "depcause/rng.hpp"
#include "depcause/corpus.hpp"
#include "depcause/io.hpp"
#include "depcause/vocab.hpp"
#include "depcause/towers.hpp"
#include "depcause/head.hpp"
#include "depcause/config.hpp"
#include "depcause/model.hpp"
#include "depcause/checkpoint.hpp"
#include "depcause/adam.hpp"
#include "depcause/eval.hpp"
#include "depcause/train.hpp"
#include "depcause/syngen.hpp"
