#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "error.hpp"

namespace wmlab {

struct ParaphraseEndpoint {
  std::string host = "127.0.0.1";
  int port = 80;
  std::string path = "/paraphrase";
  double timeout_sec = 5.0;

  // Accepts "http://host:port/path"; path defaults to /paraphrase.
  static ParaphraseEndpoint parse(const std::string& url) {
    ParaphraseEndpoint ep;
    std::string rest = url;
    const std::string scheme = "http://";
    if (rest.rfind(scheme, 0) == 0) rest = rest.substr(scheme.size());
    auto slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    if (slash != std::string::npos && slash + 1 < rest.size()) ep.path = rest.substr(slash);
    auto colon = authority.find(':');
    if (colon == std::string::npos || colon + 1 >= authority.size())
      raise(Errc::invalid_argument, "endpoint needs host:port");
    ep.host = authority.substr(0, colon);
    try {
      ep.port = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      raise(Errc::invalid_argument, "bad endpoint port");
    }
    return ep;
  }
};

// Round-trips the text through an external paraphrasing service. The wire
// contract is a POST of {"text": "..."} answered by {"text": "..."}.
inline std::string paraphrase_external(const ParaphraseEndpoint& ep, const std::string& text) {
  httplib::Client client(ep.host, ep.port);
  auto whole = static_cast<time_t>(ep.timeout_sec);
  auto frac_usec = static_cast<time_t>((ep.timeout_sec - static_cast<double>(whole)) * 1e6);
  client.set_connection_timeout(whole, frac_usec);
  client.set_read_timeout(whole, frac_usec);
  client.set_write_timeout(whole, frac_usec);

  nlohmann::json body;
  body["text"] = text;
  auto res = client.Post(ep.path, body.dump(), "application/json");
  if (!res) {
    auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
        err == httplib::Error::Write)
      raise(Errc::timeout_error, "paraphraser timed out: " + httplib::to_string(err));
    raise(Errc::network_error, "paraphraser unreachable: " + httplib::to_string(err));
  }
  if (res->status != 200)
    raise(Errc::malformed_response, "paraphraser returned status " + std::to_string(res->status));
  nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("text") || !reply["text"].is_string())
    raise(Errc::malformed_response, "paraphraser reply lacks a text field");
  return reply["text"].get<std::string>();
}

inline std::string paraphrase_external(const std::string& url, const std::string& text) {
  return paraphrase_external(ParaphraseEndpoint::parse(url), text);
}

}  // namespace wmlab
