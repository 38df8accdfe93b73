/**
 * Copyright 2026 The Mugaze Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace mugaze {

/// Base class for all mugaze errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutOfRangeFov : Error {
  using Error::Error;
};
struct DegenerateGeometry : Error {
  using Error::Error;
};
struct NotUnit : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct InvalidValue : Error {
  using Error::Error;
};
struct NearZeroNorm : Error {
  using Error::Error;
};
struct MissingPseudoLabel : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct MissingImage : Error {
  using Error::Error;
};
struct RetryExhausted : Error {
  using Error::Error;
};
struct NoPositives : Error {
  using Error::Error;
};
struct EmptyDataset : Error {
  using Error::Error;
};
struct CheckpointError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct UsageError : Error {
  using Error::Error;
};

}  // namespace mugaze
