#include "pairdbn/events.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "pairdbn/error.hpp"

namespace pairdbn {

namespace {

Timestamp parse_ns(std::string_view cell, std::size_t row) {
  Timestamp value = 0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || end != cell.data() + cell.size()) {
    throw ParseError("event windows: row " + std::to_string(row) + ": bad timestamp '" +
                     std::string(cell) + "'");
  }
  return value;
}

}  // namespace

void write_event_windows(std::ostream& out, std::span<const EventWindow> windows) {
  out << "vehicle_id,start_ns,end_ns,kind\n";
  for (const auto& w : windows) {
    out << w.vehicle_id << ',' << w.start_ns << ',' << w.end_ns << ',' << w.kind << '\n';
  }
}

std::vector<EventWindow> parse_event_windows(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("vehicle_id,start_ns,end_ns,kind", 0) != 0) {
    throw SchemaError("event windows: expected header 'vehicle_id,start_ns,end_ns,kind'");
  }
  std::vector<EventWindow> windows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t comma; (comma = line.find(',', start)) != std::string::npos; start = comma + 1) {
      fields.push_back(line.substr(start, comma - start));
    }
    fields.push_back(line.substr(start));
    if (fields.size() != 4) {
      throw ParseError("event windows: row " + std::to_string(row) + " needs 4 fields");
    }
    EventWindow w{fields[0], parse_ns(fields[1], row), parse_ns(fields[2], row), fields[3]};
    if (w.end_ns < w.start_ns) {
      throw DataError("event windows: row " + std::to_string(row) + " ends before it starts");
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

std::vector<EventWindow> read_event_windows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open event windows " + path.string());
  return parse_event_windows(in);
}

}  // namespace pairdbn
