// SPDX-License-Identifier: Apache-2.0
#include "egrpo/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <mutex>
#include <ostream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "egrpo/errors.hpp"
#include "egrpo/policy.hpp"
#include "egrpo/reward.hpp"
#include "egrpo/rollout.hpp"

namespace egrpo {

using json = nlohmann::json;

namespace {

struct BadRequest {
    std::string message;
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string json_string(std::string_view s) {
    return json(std::string(s)).dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string head(const std::string& request_id_json) {
    return "{\"protocol_version\":" + std::to_string(kProtocolVersion) + ",\"request_id\":" + request_id_json;
}

std::string error_response(const std::string& request_id_json, std::string_view code, const std::string& message,
                           std::size_t line_no) {
    return head(request_id_json) + ",\"error\":{\"code\":" + json_string(code) + ",\"message\":" + json_string(message) +
           ",\"line\":" + std::to_string(line_no) + "}}";
}

std::string health_response(const std::string& request_id_json) {
    const RewardConfig d;
    const ClipConfig c;
    return head(request_id_json) + ",\"status\":\"ok\",\"version\":" + json_string(kServiceVersion) +
           ",\"defaults\":{\"alpha\":" + num(d.alpha) + ",\"mode\":" + json_string(to_string(d.mode)) +
           ",\"std_epsilon\":" + num(d.std_epsilon) +
           ",\"gamma_max_includes_errors\":" + (d.gamma_max_includes_errors ? "true" : "false") +
           ",\"eps_low\":" + num(c.eps_low) + ",\"eps_high\":" + num(c.eps_high) + "}}";
}

const json& field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw BadRequest{std::string("missing field '") + key + "'"};
    return *it;
}

std::vector<std::string> strings(const json& value, const char* what) {
    if (!value.is_array()) throw BadRequest{std::string(what) + " must be a list of strings"};
    std::vector<std::string> out;
    for (const auto& item : value) {
        if (!item.is_string()) throw BadRequest{std::string(what) + " must be a list of strings"};
        out.push_back(item.get<std::string>());
    }
    return out;
}

bool boolean(const json& value, const char* what) {
    if (!value.is_boolean()) throw BadRequest{std::string(what) + " must be a boolean"};
    return value.get<bool>();
}

RolloutStatus parse_status(const json& value) {
    if (!value.is_string()) throw BadRequest{"status must be a string"};
    const auto s = value.get<std::string>();
    if (s == "ok") return RolloutStatus::Ok;
    if (s == "format_error") return RolloutStatus::FormatError;
    if (s == "overlength") return RolloutStatus::Overlength;
    throw BadRequest{"unknown status '" + s + "'"};
}

std::optional<Verdict> parse_verdict(const json& obj) {
    auto it = obj.find("verdict");
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw BadRequest{"verdict must be \"correct\", \"wrong\" or null"};
    const auto s = it->get<std::string>();
    if (s == "correct") return Verdict::Correct;
    if (s == "wrong") return Verdict::Wrong;
    throw BadRequest{"unknown verdict '" + s + "'"};
}

RolloutOutcome parse_rollout_entry(const json& r, std::size_t index) {
    if (!r.is_object()) throw BadRequest{"rollout " + std::to_string(index) + " is not an object"};
    for (const auto& [key, value] : r.items()) {
        if (key != "raw" && key != "thought_texts" && key != "status" && key != "verdict") {
            throw BadRequest{"unknown rollout field '" + key + "'"};
        }
    }
    RolloutOutcome out;
    out.verdict = parse_verdict(r);
    if (r.contains("raw")) {
        if (r.contains("thought_texts") || r.contains("status")) {
            throw BadRequest{"rollout " + std::to_string(index) + " mixes raw with thought_texts/status"};
        }
        if (!r.at("raw").is_string()) throw BadRequest{"raw must be a string"};
        const ParseResult parsed =
            parse_rollout(r.at("raw").get<std::string>(), ParseOptions{ToolPolicy::PassThrough, true});
        if (const auto* rollout = std::get_if<Rollout>(&parsed)) {
            out.status = rollout->status;
            out.thoughts = thoughts_of(*rollout);
        } else {
            out.status = RolloutStatus::FormatError;
        }
        return out;
    }
    out.thoughts = strings(field(r, "thought_texts"), "thought_texts");
    out.status = parse_status(field(r, "status"));
    return out;
}

std::string score_response(const json& req, const std::string& request_id_json) {
    static const char* const kKeys[] = {"protocol_version", "request_id", "alpha",    "mode",
                                        "entities",         "match_config", "rollouts", "std_epsilon",
                                        "gamma_max_includes_errors"};
    for (const auto& [key, value] : req.items()) {
        if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
            throw BadRequest{"unknown field '" + key + "'"};
        }
    }
    RewardConfig cfg;
    if (req.contains("alpha")) {
        const auto& a = req.at("alpha");
        if (!a.is_number() || !std::isfinite(a.get<double>()) || a.get<double>() < 0.0 || a.get<double>() > 1.0) {
            throw BadRequest{"alpha must be a number in [0, 1]"};
        }
        cfg.alpha = a.get<double>();
    }
    if (req.contains("mode")) {
        if (!req.at("mode").is_string()) throw BadRequest{"mode must be \"egrpo\" or \"grpo\""};
        const auto m = req.at("mode").get<std::string>();
        if (m != "egrpo" && m != "grpo") throw BadRequest{"mode must be \"egrpo\" or \"grpo\""};
        cfg.mode = parse_reward_mode(m);
    }
    if (req.contains("std_epsilon")) {
        const auto& e = req.at("std_epsilon");
        if (!e.is_number() || !(e.get<double>() > 0.0)) throw BadRequest{"std_epsilon must be a positive number"};
        cfg.std_epsilon = e.get<double>();
    }
    if (req.contains("gamma_max_includes_errors")) {
        cfg.gamma_max_includes_errors = boolean(req.at("gamma_max_includes_errors"), "gamma_max_includes_errors");
    }

    MatchConfig match;
    if (req.contains("match_config")) {
        const auto& mc = req.at("match_config");
        if (!mc.is_object()) throw BadRequest{"match_config must be an object"};
        for (const auto& [key, value] : mc.items()) {
            if (key == "case_sensitive") match.case_sensitive = boolean(value, "case_sensitive");
            else if (key == "whitespace_collapse") match.whitespace_collapse = boolean(value, "whitespace_collapse");
            else if (key == "word_boundary") match.word_boundary = boolean(value, "word_boundary");
            else if (key == "unicode_normalization") {
                if (value != "NFC") throw BadRequest{"only NFC normalization is supported"};
            } else {
                throw BadRequest{"unknown match_config field '" + key + "'"};
            }
        }
    }

    const EntitySet es(strings(field(req, "entities"), "entities"), match);
    const auto& rollouts = field(req, "rollouts");
    if (!rollouts.is_array()) throw BadRequest{"rollouts must be a list"};
    if (rollouts.empty()) throw BadRequest{"rollouts must not be empty"};
    std::vector<RolloutOutcome> outcomes;
    outcomes.reserve(rollouts.size());
    for (std::size_t i = 0; i < rollouts.size(); ++i) outcomes.push_back(parse_rollout_entry(rollouts[i], i));

    const GroupScore score = score_group(outcomes, es, cfg);
    std::string out = head(request_id_json) + ",\"results\":[";
    for (std::size_t i = 0; i < score.per_rollout.size(); ++i) {
        const ScoredRollout& s = score.per_rollout[i];
        if (i) out += ',';
        out += "{\"gamma\":" + num(to_double(s.gamma)) + ",\"gamma_exact\":" + json_string(to_string(s.gamma)) +
               ",\"gamma_hat\":" + num(to_double(s.gamma_hat)) + ",\"gamma_hat_exact\":" + json_string(to_string(s.gamma_hat)) +
               ",\"reward\":" + num(s.reward) + ",\"advantage\":" + num(s.advantage) +
               ",\"in_loss\":" + (s.in_loss ? "true" : "false") + "}";
    }
    out += "],\"group\":{\"mean\":" + num(score.mean_reward) + ",\"std\":" + num(score.std_reward) + "}}";
    return out;
}

}  // namespace

std::string handle_request_line(std::string_view line, std::size_t line_no) {
    std::string request_id_json = "null";
    try {
        json req = json::parse(line.begin(), line.end());
        if (!req.is_object()) throw BadRequest{"request must be a JSON object"};
        if (auto it = req.find("request_id"); it != req.end()) {
            if (!it->is_string() && !it->is_number_integer()) throw BadRequest{"request_id must be a string or integer"};
            request_id_json = it->dump();
        }
        if (auto it = req.find("protocol_version"); it != req.end()) {
            if (!it->is_number_integer() || it->get<long long>() != kProtocolVersion) {
                throw BadRequest{"unsupported protocol_version"};
            }
        }
        if (auto it = req.find("op"); it != req.end()) {
            if (*it == "health") return health_response(request_id_json);
            throw BadRequest{"unknown op"};
        }
        if (request_id_json == "null") throw BadRequest{"missing field 'request_id'"};
        return score_response(req, request_id_json);
    } catch (const BadRequest& e) {
        return error_response(request_id_json, "bad_request", e.message, line_no);
    } catch (const json::exception& e) {
        return error_response(request_id_json, "bad_request", e.what(), line_no);
    } catch (const Error& e) {
        return error_response(request_id_json, error_code_name(e.code()), e.what(), line_no);
    } catch (const std::exception& e) {
        return error_response(request_id_json, "internal_error", e.what(), line_no);
    }
}

std::size_t serve_stream(std::istream& in, std::ostream& out) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t answered = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        out << handle_request_line(line, line_no) << '\n';
        out.flush();
        ++answered;
    }
    return answered;
}

namespace {

bool send_all(int fd, const std::string& data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

void serve_connection(int fd) {
    std::string buffer;
    std::size_t line_no = 0;
    char chunk[65536];
    while (true) {
        const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::string replies;
        std::size_t start = 0;
        for (std::size_t nl; (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
            std::string_view line(buffer.data() + start, nl - start);
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
            replies += handle_request_line(line, line_no);
            replies += '\n';
        }
        buffer.erase(0, start);
        if (!replies.empty() && !send_all(fd, replies)) break;
    }
}

}  // namespace

void serve_tcp(const TcpServerOptions& options) {
    const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0) throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(options.port);
    if (::inet_pton(AF_INET, options.host.c_str(), &addr.sin_addr) != 1) {
        ::close(listener);
        throw Error(ErrorCode::Io, "bad IPv4 address '" + options.host + "'");
    }
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 64) != 0) {
        const std::string why = std::strerror(errno);
        ::close(listener);
        throw Error(ErrorCode::Io, "cannot listen on " + options.host + ":" + std::to_string(options.port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
    if (options.on_listening) options.on_listening(ntohs(addr.sin_port));

    std::mutex mu;
    std::vector<int> open_fds;
    std::vector<std::thread> workers;
    while (!(options.stop && options.stop->load())) {
        pollfd p{listener, POLLIN, 0};
        const int ready = ::poll(&p, 1, 100);
        if (ready <= 0) continue;
        const int fd = ::accept(listener, nullptr, nullptr);
        if (fd < 0) continue;
        {
            std::lock_guard<std::mutex> lock(mu);
            open_fds.push_back(fd);
        }
        workers.emplace_back([fd, &mu, &open_fds] {
            serve_connection(fd);
            std::lock_guard<std::mutex> lock(mu);
            open_fds.erase(std::remove(open_fds.begin(), open_fds.end(), fd), open_fds.end());
            ::close(fd);
        });
    }
    ::close(listener);
    {
        // Wake workers blocked in recv on connections that are still open.
        std::lock_guard<std::mutex> lock(mu);
        for (int fd : open_fds) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : workers) t.join();
}

}  // namespace egrpo
