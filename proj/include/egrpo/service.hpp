// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

namespace egrpo {

inline constexpr int kProtocolVersion = 1;
inline constexpr const char* kServiceVersion = "egrpo-reward-service 0.1.0";

/// Handle one request line and return one response line (no trailing
/// newline). Never throws; every failure becomes an error response.
///
/// Score request:
///   {"protocol_version":1,"request_id":"r1","alpha":0.3,"mode":"egrpo",
///    "entities":["Leonardo","Titanic"],
///    "match_config":{"case_sensitive":true,"whitespace_collapse":false,"word_boundary":false},
///    "rollouts":[{"thought_texts":["..."],"verdict":"correct","status":"ok"}, ...]}
/// A rollout may give "raw" tag-format text instead of thought_texts/status;
/// it is parsed (unknown tools pass through) and a format violation makes it
/// a format_error rollout.
///
/// Score response:
///   {"protocol_version":1,"request_id":"r1","results":[{"gamma":..,"gamma_exact":"1/2",
///    "gamma_hat":..,"gamma_hat_exact":"1/2","reward":..,"advantage":..,"in_loss":true}, ...],
///    "group":{"mean":..,"std":..}}
/// Health: {"op":"health"} -> {"protocol_version":1,"request_id":null,"status":"ok","version":..,"defaults":{..}}
/// Error:  {"protocol_version":1,"request_id":..,"error":{"code":"bad_request","message":..,"line":N}}
std::string handle_request_line(std::string_view line, std::size_t line_no);

/// Reads requests from `in` until EOF, one response line per request line.
/// Blank lines are skipped. Returns the number of requests answered.
std::size_t serve_stream(std::istream& in, std::ostream& out);

struct TcpServerOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;  // 0 picks a free port
    // Invoked once the socket is listening, with the bound port.
    std::function<void(std::uint16_t)> on_listening;
    // Polled between accepts; the server returns once it becomes true.
    const std::atomic<bool>* stop = nullptr;
};

/// One thread per connection; each connection is a serve_stream session.
/// Throws Io when the address cannot be bound.
void serve_tcp(const TcpServerOptions& options);

}  // namespace egrpo
