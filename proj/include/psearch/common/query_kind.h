// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_COMMON_QUERY_KIND_H_
#define PSEARCH_COMMON_QUERY_KIND_H_

#include <cstdint>

namespace psearch {

// Known only to the issuing client; never serialized toward the server.
enum class QueryKind : uint8_t { kReal = 0, kFake = 1 };

}  // namespace psearch

#endif  // PSEARCH_COMMON_QUERY_KIND_H_
