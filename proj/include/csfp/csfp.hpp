/*
Copyright 2026 The csfp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include "csfp/binary.hpp"
#include "csfp/csf_map.hpp"
#include "csfp/csv.hpp"
#include "csfp/distort.hpp"
#include "csfp/error.hpp"
#include "csfp/features.hpp"
#include "csfp/image_io.hpp"
#include "csfp/losses.hpp"
#include "csfp/metrics.hpp"
#include "csfp/oqa.hpp"
#include "csfp/parallel.hpp"
#include "csfp/tensor.hpp"
#include "csfp/tnsr.hpp"
