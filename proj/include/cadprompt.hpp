// Copyright 2026 The cadprompt Authors.
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
#pragma once

#include "cadprompt/analytics.hpp"
#include "cadprompt/backend.hpp"
#include "cadprompt/corpus.hpp"
#include "cadprompt/embedder.hpp"
#include "cadprompt/embedding.hpp"
#include "cadprompt/error.hpp"
#include "cadprompt/evalstats.hpp"
#include "cadprompt/execute.hpp"
#include "cadprompt/genplan.hpp"
#include "cadprompt/report.hpp"
#include "cadprompt/retrieval.hpp"
#include "cadprompt/run_manifest.hpp"
#include "cadprompt/survey.hpp"
#include "cadprompt/survey_http.hpp"
