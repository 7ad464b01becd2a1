#pragma once

#include "mmtk/bench.hpp"
#include "mmtk/checkpoint.hpp"
#include "mmtk/common.hpp"
#include "mmtk/config.hpp"
#include "mmtk/decoder.hpp"
#include "mmtk/fusion.hpp"
#include "mmtk/io.hpp"
#include "mmtk/model.hpp"
#include "mmtk/nn.hpp"
#include "mmtk/ops.hpp"
#include "mmtk/optim.hpp"
#include "mmtk/pipeline.hpp"
#include "mmtk/seqtok.hpp"
#include "mmtk/tensor.hpp"
#include "mmtk/text.hpp"
#include "mmtk/vision.hpp"
