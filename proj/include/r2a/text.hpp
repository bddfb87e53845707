// Copyright 2026 The R2A Authors.
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

#include <cstddef>
#include <string>
#include <string_view>

namespace r2a {

bool is_valid_utf8(std::string_view s) noexcept;

/// Strips ASCII whitespace from both ends.
std::string_view trim(std::string_view s) noexcept;

/// Counts maximal runs of non-whitespace bytes.
std::size_t whitespace_token_count(std::string_view text) noexcept;

/// Lowercase (ASCII), trim, collapse internal whitespace runs to one space.
std::string normalize_answer(std::string_view s);

}  // namespace r2a
