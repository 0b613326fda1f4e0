// Copyright 2026 The racedriver Authors
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

// Everything except io.hpp, which needs nlohmann/json.

#pragma once

#include "racedriver/adaptation.hpp"
#include "racedriver/core.hpp"
#include "racedriver/curvilinear.hpp"
#include "racedriver/demonstrations.hpp"
#include "racedriver/driver_policy.hpp"
#include "racedriver/elastic_band.hpp"
#include "racedriver/path.hpp"
#include "racedriver/path_synthesis.hpp"
#include "racedriver/promp.hpp"
#include "racedriver/simulation.hpp"
#include "racedriver/speed_envelope.hpp"
#include "racedriver/synthetic.hpp"
#include "racedriver/track.hpp"
#include "racedriver/track_analysis.hpp"
#include "racedriver/vehicle.hpp"
