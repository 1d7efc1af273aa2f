#include "educhat/http_util.hpp"

#include <stdexcept>

namespace educhat {

HttpEndpoint parse_endpoint(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw std::invalid_argument("not a URL: '" + std::string(url) + "'");
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw std::invalid_argument("unsupported URL scheme '" + std::string(scheme) + "'");
  }
  auto rest = url.substr(scheme_end + 3);
  auto slash = rest.find('/');
  HttpEndpoint ep;
  ep.origin = std::string(url.substr(0, scheme_end + 3)) + std::string(rest.substr(0, slash));
  ep.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  if (rest.substr(0, slash).empty()) throw std::invalid_argument("URL has no host: '" + std::string(url) + "'");
  return ep;
}

std::string join_path(std::string_view base, std::string_view suffix) {
  std::string out(base);
  while (!out.empty() && out.back() == '/') out.pop_back();
  if (!suffix.empty() && suffix.front() != '/') out += '/';
  out += suffix;
  if (out.empty()) out = "/";
  return out;
}

std::string format_sse(std::string_view event, std::string_view data) {
  std::string out = "event: ";
  out += event;
  out += '\n';
  std::size_t start = 0;
  while (true) {
    auto nl = data.find('\n', start);
    out += "data: ";
    out += data.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    out += '\n';
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  out += '\n';
  return out;
}

void SseParser::feed(std::string_view chunk) {
  buffer_ += chunk;
  std::size_t start = 0;
  while (true) {
    auto nl = buffer_.find('\n', start);
    if (nl == std::string::npos) break;
    std::string_view line(buffer_.data() + start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    process_line(line);
    start = nl + 1;
  }
  buffer_.erase(0, start);
}

void SseParser::finish() {
  if (!buffer_.empty()) {
    process_line(buffer_);
    buffer_.clear();
  }
  dispatch();
}

void SseParser::process_line(std::string_view line) {
  if (line.empty()) {
    dispatch();
    return;
  }
  if (line.front() == ':') return;  // comment
  auto colon = line.find(':');
  auto field = line.substr(0, colon);
  std::string_view value;
  if (colon != std::string_view::npos) {
    value = line.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.remove_prefix(1);
  }
  if (field == "event") {
    current_.event = std::string(value);
  } else if (field == "data") {
    if (has_data_) current_.data += '\n';
    current_.data += value;
    has_data_ = true;
  }
}

void SseParser::dispatch() {
  if (has_data_ && on_event_) on_event_(current_);
  current_ = SseEvent{};
  has_data_ = false;
}

}  // namespace educhat
