#include "fusemean/cli/json_writer.hpp"

#include <cmath>
#include <cstdio>

namespace fusemean::cli {

namespace {

void
write_string(const std::string& s, std::string& out)
{
  out += '"';
  for (unsigned char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
}

void
write_double(double v, std::string& out)
{
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void
write(const Json& v, int depth, std::string& out)
{
  std::string pad(static_cast<std::size_t>(depth + 1) * 2, ' ');
  std::string close(static_cast<std::size_t>(depth) * 2, ' ');
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first)
          out += ",\n";
        first = false;
        out += pad;
        write_string(it.key(), out);
        out += ": ";
        write(it.value(), depth + 1, out);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& e : v) {
        if (!first)
          out += ",\n";
        first = false;
        out += pad;
        write(e, depth + 1, out);
      }
      out += "\n" + close + "]";
      return;
    }
    case Json::value_t::string:
      write_string(v.get<std::string>(), out);
      return;
    case Json::value_t::boolean:
      out += v.get<bool>() ? "true" : "false";
      return;
    case Json::value_t::number_integer:
      out += std::to_string(v.get<std::int64_t>());
      return;
    case Json::value_t::number_unsigned:
      out += std::to_string(v.get<std::uint64_t>());
      return;
    case Json::value_t::number_float:
      write_double(v.get<double>(), out);
      return;
    default:
      out += "null";
  }
}

} // namespace

std::string
write_json(const Json& value)
{
  std::string out;
  write(value, 0, out);
  out += '\n';
  return out;
}

} // namespace fusemean::cli
