#pragma once

#include <spdlog/spdlog.h>

namespace cmpsced::detail {

/// Library logger on stderr. Level comes from CMP_SCED_LOG (debug, info,
/// warn, ...); warn when unset.
spdlog::logger& log();

}  // namespace cmpsced::detail
