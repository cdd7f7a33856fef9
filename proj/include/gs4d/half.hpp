// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace gs4d {

/// IEEE 754 binary32 -> binary16, round to nearest even. Overflow maps to inf.
std::uint16_t float_to_half(float value);

/// Exact binary16 -> binary32 widening.
float half_to_float(std::uint16_t bits);

inline constexpr float kHalfMax = 65504.0f;

}  // namespace gs4d
