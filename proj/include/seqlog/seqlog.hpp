#pragma once

#include "seqlog/loss.hpp"
#include "seqlog/transcript.hpp"
#include "seqlog/experts.hpp"
#include "seqlog/predictors.hpp"
#include "seqlog/covering.hpp"
#include "seqlog/shtarkov.hpp"
#include "seqlog/bounds.hpp"
#include "seqlog/harness.hpp"
