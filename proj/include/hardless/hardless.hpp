//*****************************************************************************
// Copyright 2026 The Hardless Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//*****************************************************************************
#pragma once

#include "hardless/bench.hpp"
#include "hardless/core.hpp"
#include "hardless/event_log.hpp"
#include "hardless/experiment.hpp"
#include "hardless/metrics.hpp"
#include "hardless/node.hpp"
#include "hardless/process_backend.hpp"
#include "hardless/queue.hpp"
#include "hardless/queue_protocol.hpp"
#include "hardless/runtime.hpp"
#include "hardless/scenario_io.hpp"
#include "hardless/store.hpp"
#include "hardless/cli.hpp"
