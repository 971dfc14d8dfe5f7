#include "l2swbm/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "l2swbm/errors.hpp"

namespace l2swbm {

std::string YearMonth::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

YearMonth YearMonth::parse(std::string_view text) {
  auto dash = text.find('-');
  if (dash == std::string_view::npos) throw ConfigError("bad year-month '" + std::string(text) + "'");
  YearMonth ym;
  auto y = std::from_chars(text.data(), text.data() + dash, ym.year);
  auto m = std::from_chars(text.data() + dash + 1, text.data() + text.size(), ym.month);
  if (y.ec != std::errc{} || m.ec != std::errc{} || m.ptr != text.data() + text.size() ||
      ym.month < 1 || ym.month > 12) {
    throw ConfigError("bad year-month '" + std::string(text) + "'");
  }
  return ym;
}

char component_char(Component c) {
  switch (c) {
    case Component::P: return 'P';
    case Component::E: return 'E';
    case Component::R: return 'R';
    case Component::I: return 'I';
    case Component::Q: return 'Q';
    case Component::D: return 'D';
    case Component::H: return 'H';
  }
  return '?';
}

Component parse_component(std::string_view text) {
  if (text.size() == 1) {
    switch (text[0]) {
      case 'P': return Component::P;
      case 'E': return Component::E;
      case 'R': return Component::R;
      case 'I': return Component::I;
      case 'Q': return Component::Q;
      case 'D': return Component::D;
      case 'H': return Component::H;
      default: break;
    }
  }
  throw ConfigError("unknown component '" + std::string(text) + "' (expected one of P E R I Q D H)");
}

std::string Window::str() const { return cumulative ? "C" : std::to_string(width); }

}  // namespace l2swbm
