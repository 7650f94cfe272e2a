/*
 * Copyright 2026 The SMP Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "smp/analysis.hpp"
#include "smp/config.hpp"
#include "smp/dataset.hpp"
#include "smp/error.hpp"
#include "smp/executor.hpp"
#include "smp/gradcheck.hpp"
#include "smp/image_io.hpp"
#include "smp/layers.hpp"
#include "smp/model_zoo.hpp"
#include "smp/network.hpp"
#include "smp/pooling.hpp"
#include "smp/serialize.hpp"
#include "smp/tensor.hpp"
#include "smp/thread_pool.hpp"
#include "smp/train.hpp"
#include "smp/verify.hpp"
