#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pairdbn/types.hpp"

namespace pairdbn {

/// A labelled ground-truth interval, e.g. a vehicle's emergency stop.
struct EventWindow {
  std::string vehicle_id;
  Timestamp start_ns = 0;
  Timestamp end_ns = 0;
  std::string kind;

  bool contains(Timestamp t) const { return t >= start_ns && t <= end_ns; }
};

/// Sidecar format: header `vehicle_id,start_ns,end_ns,kind`, one window per row.
void write_event_windows(std::ostream& out, std::span<const EventWindow> windows);
std::vector<EventWindow> parse_event_windows(std::istream& in);
std::vector<EventWindow> read_event_windows(const std::filesystem::path& path);

}  // namespace pairdbn
