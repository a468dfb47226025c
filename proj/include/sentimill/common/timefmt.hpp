#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "sentimill/common/clock.hpp"

namespace sentimill {

/// Parses an ISO-8601 timestamp ("2014-06-12T20:00:00Z",
/// "2014-06-12T22:00:00.250+02:00", "2014-06-12") into epoch milliseconds.
/// A bare integer is accepted as epoch milliseconds.
std::optional<Millis> parse_timestamp(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string format_iso8601(Millis ms);

}  // namespace sentimill
