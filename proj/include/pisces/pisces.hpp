// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pisces/costmatrix.hpp"
#include "pisces/embedding.hpp"
#include "pisces/error.hpp"
#include "pisces/ffn.hpp"
#include "pisces/fusion.hpp"
#include "pisces/io.hpp"
#include "pisces/metrics.hpp"
#include "pisces/neural_ot.hpp"
#include "pisces/numerics.hpp"
#include "pisces/posttrain/denoiser.hpp"
#include "pisces/posttrain/direct.hpp"
#include "pisces/posttrain/grpo.hpp"
#include "pisces/posttrain/schedule.hpp"
#include "pisces/posttrain/trainer.hpp"
#include "pisces/posttrain/world.hpp"
#include "pisces/rewards.hpp"
#include "pisces/sinkhorn.hpp"
#include "pisces/synth.hpp"
