// Copyright 2026 The SurveyQC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Umbrella header for the whole library.

#pragma once

#include "surveyqc/autoencoder.hpp"
#include "surveyqc/chowliu.hpp"
#include "surveyqc/common.hpp"
#include "surveyqc/config.hpp"
#include "surveyqc/csv.hpp"
#include "surveyqc/evaluation.hpp"
#include "surveyqc/pipeline.hpp"
#include "surveyqc/random.hpp"
#include "surveyqc/survey_data.hpp"
#include "surveyqc/synthetic.hpp"
