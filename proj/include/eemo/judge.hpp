#pragma once

// Description judging providers. The replay provider reads recorded scores;
// a remote judge plugs in through TransportJudgeProvider, which owns the
// request/response record shape and leaves the transport to the caller.

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "eemo/error.hpp"
#include "eemo/io/table.hpp"
#include "eemo/metrics.hpp"
#include "eemo/text.hpp"

namespace eemo {

struct JudgeRequest {
  std::string item_id;
  std::string question;
  std::string response;
  std::string golden;
  int rounds = 5;
};

class JudgeProvider {
 public:
  virtual ~JudgeProvider() = default;
  virtual JudgeScores score(const JudgeRequest& request) const = 0;
};

// Replay file: one JSON object per line,
//   {"item_id": "...", "dimension": "completeness|precision|relevance", "rounds": [2, 2, 1, 2, 2]}
class ReplayJudgeProvider : public JudgeProvider {
 public:
  static ReplayJudgeProvider parse(std::string_view content) {
    ReplayJudgeProvider p;
    std::size_t line_no = 0;
    for (const auto& raw : text::split(content, '\n')) {
      ++line_no;
      const auto line = text::trim(raw);
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        const auto item = j.at("item_id").get<std::string>();
        const auto dim = j.at("dimension").get<std::string>();
        if (dim != "completeness" && dim != "precision" && dim != "relevance") {
          throw Error(ErrorKind::kParse, "unknown judge dimension '" + dim + "'");
        }
        auto rounds = j.at("rounds").get<std::vector<int>>();
        if (rounds.empty()) throw Error(ErrorKind::kParse, "judge entry without rounds");
        p.entries_[{item, dim}] = std::move(rounds);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kParse, "judge replay line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return p;
  }

  static ReplayJudgeProvider load(const std::string& path) { return parse(io::read_file(path)); }

  JudgeScores score(const JudgeRequest& request) const override {
    JudgeScores s;
    s.completeness = rounds(request.item_id, "completeness");
    s.precision = rounds(request.item_id, "precision");
    s.relevance = rounds(request.item_id, "relevance");
    s.validate();
    return s;
  }

 private:
  const std::vector<int>& rounds(const std::string& item, const std::string& dim) const {
    const auto it = entries_.find({item, dim});
    if (it == entries_.end()) {
      throw Error(ErrorKind::kNotFound, "no replayed " + dim + " scores for item '" + item + "'");
    }
    return it->second;
  }

  std::map<std::pair<std::string, std::string>, std::vector<int>> entries_;
};

// Request record:  {"item_id", "question", "response", "golden", "rounds",
//                   "dimensions": ["completeness", "precision", "relevance"]}
// Response record: {"item_id", "completeness": [..], "precision": [..], "relevance": [..]}
inline nlohmann::json judge_request_record(const JudgeRequest& r) {
  return {{"item_id", r.item_id}, {"question", r.question}, {"response", r.response}, {"golden", r.golden},
          {"rounds", r.rounds},   {"dimensions", {"completeness", "precision", "relevance"}}};
}

inline JudgeScores parse_judge_response_record(const nlohmann::json& j, const std::string& expected_item) {
  try {
    if (j.at("item_id").get<std::string>() != expected_item) {
      throw Error(ErrorKind::kTransport, "judge answered for a different item");
    }
    JudgeScores s;
    s.completeness = j.at("completeness").get<std::vector<int>>();
    s.precision = j.at("precision").get<std::vector<int>>();
    s.relevance = j.at("relevance").get<std::vector<int>>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kTransport, std::string("malformed judge response: ") + e.what());
  }
}

// Transport maps a serialized request to a serialized response and may throw;
// any failure surfaces as ErrorKind::kTransport. Calls share no state, so a
// thread-safe transport makes the provider safe for concurrent requests.
class TransportJudgeProvider : public JudgeProvider {
 public:
  using Transport = std::function<std::string(const std::string&)>;
  explicit TransportJudgeProvider(Transport transport) : transport_(std::move(transport)) {}

  JudgeScores score(const JudgeRequest& request) const override {
    std::string reply;
    try {
      reply = transport_(judge_request_record(request).dump());
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kTransport, e.what());
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kTransport, std::string("judge reply is not JSON: ") + e.what());
    }
    return parse_judge_response_record(j, request.item_id);
  }

 private:
  Transport transport_;
};

}  // namespace eemo
