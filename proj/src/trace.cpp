#include "doppler/trace.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

namespace doppler::netsim {

using json = nlohmann::ordered_json;

const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::threshold:
      return "threshold";
    case TerminationReason::l_max:
      return "l_max";
    case TerminationReason::diverged:
      return "diverged";
  }
  return "?";
}

void RunTrace::append(IterationRecord record) {
  const std::uint64_t expected = iterations.size() + 1;
  if (record.iteration != expected) {
    throw Error("trace iteration " + std::to_string(record.iteration) + " out of order, expected " +
                std::to_string(expected));
  }
  iterations.push_back(std::move(record));
}

const IterationRecord& RunTrace::last() const {
  if (iterations.empty()) throw Error("trace has no iterations");
  return iterations.back();
}

namespace {

// nlohmann writes non-finite numbers as null; these restore them.
double number_or(const json& j, double fallback) {
  return j.is_null() ? fallback : j.get<double>();
}

std::vector<double> numbers_or(const json& j, double fallback) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(number_or(v, fallback));
  return out;
}

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

TerminationReason reason_from(const std::string& s) {
  if (s == "threshold") return TerminationReason::threshold;
  if (s == "l_max") return TerminationReason::l_max;
  if (s == "diverged") return TerminationReason::diverged;
  throw Error("unknown termination reason '" + s + "'");
}

}  // namespace

void write_jsonl(std::ostream& out, const RunTrace& trace) {
  json header = {{"record", "header"},
                 {"algorithm", trace.algorithm},
                 {"pdr", trace.pdr},
                 {"max_delay", trace.max_delay},
                 {"seed", trace.seed},
                 {"config_hash", trace.config_hash},
                 {"threshold", trace.threshold},
                 {"l_max", trace.l_max},
                 {"normalization", trace.normalization}};
  out << header.dump() << '\n';
  for (const auto& r : trace.iterations) {
    json rec = {{"record", "iteration"},
                {"iteration", r.iteration},
                {"n_nodes", r.n_nodes},
                {"nodes", r.nodes},
                {"means", r.means},
                {"variances", r.variances},
                {"deltas", r.deltas},
                {"max_delta", r.max_delta},
                {"converged", r.converged},
                {"avg_mse", r.avg_mse},
                {"informative", r.informative},
                {"crlb_avg", r.crlb_avg},
                {"messages", r.messages},
                {"messages_cumulative", r.messages_cumulative},
                {"max_stamp_lag", r.max_stamp_lag},
                {"delivery",
                 {{"delivered_now", r.delivery.delivered_now},
                  {"delayed", r.delivery.delayed},
                  {"dropped", r.delivery.dropped},
                  {"late_arrivals", r.delivery.late_arrivals},
                  {"stale_rejected", r.delivery.stale_rejected},
                  {"lost_in_flight", r.delivery.lost_in_flight}}},
                {"events", r.events},
                {"unreachable", r.unreachable}};
    out << rec.dump() << '\n';
  }
  json summary = {{"record", "summary"},
                  {"iterations", trace.iterations.size()},
                  {"reason", to_string(trace.reason)},
                  {"divergence", trace.divergence}};
  out << summary.dump() << '\n';
}

RunTrace read_jsonl(std::istream& in) {
  RunTrace trace;
  std::string line;
  bool saw_header = false;
  bool saw_summary = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error("trace line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string kind = j.at("record").get<std::string>();
    if (kind == "header") {
      trace.algorithm = j.at("algorithm").get<std::string>();
      trace.pdr = j.at("pdr").get<double>();
      trace.max_delay = j.at("max_delay").get<std::uint32_t>();
      trace.seed = j.at("seed").get<std::uint64_t>();
      trace.config_hash = j.at("config_hash").get<std::string>();
      trace.threshold = j.at("threshold").get<double>();
      trace.l_max = j.at("l_max").get<std::uint64_t>();
      trace.normalization = j.at("normalization").get<double>();
      saw_header = true;
    } else if (kind == "iteration") {
      IterationRecord r;
      r.iteration = j.at("iteration").get<std::uint64_t>();
      r.n_nodes = j.at("n_nodes").get<std::uint64_t>();
      r.nodes = j.at("nodes").get<std::vector<NodeId>>();
      r.means = numbers_or(j.at("means"), kNan);
      r.variances = numbers_or(j.at("variances"), kInf);
      r.deltas = numbers_or(j.at("deltas"), kInf);
      r.max_delta = number_or(j.at("max_delta"), kInf);
      r.converged = j.at("converged").get<bool>();
      r.avg_mse = number_or(j.at("avg_mse"), kNan);
      r.informative = j.at("informative").get<std::uint64_t>();
      r.crlb_avg = number_or(j.at("crlb_avg"), kNan);
      r.messages = j.at("messages").get<std::uint64_t>();
      r.messages_cumulative = j.at("messages_cumulative").get<std::uint64_t>();
      r.max_stamp_lag = j.at("max_stamp_lag").get<std::uint64_t>();
      const auto& d = j.at("delivery");
      r.delivery.delivered_now = d.at("delivered_now").get<std::uint64_t>();
      r.delivery.delayed = d.at("delayed").get<std::uint64_t>();
      r.delivery.dropped = d.at("dropped").get<std::uint64_t>();
      r.delivery.late_arrivals = d.at("late_arrivals").get<std::uint64_t>();
      r.delivery.stale_rejected = d.at("stale_rejected").get<std::uint64_t>();
      r.delivery.lost_in_flight = d.at("lost_in_flight").get<std::uint64_t>();
      r.events = j.at("events").get<std::vector<std::string>>();
      r.unreachable = j.at("unreachable").get<std::vector<NodeId>>();
      trace.append(std::move(r));
    } else if (kind == "summary") {
      trace.reason = reason_from(j.at("reason").get<std::string>());
      trace.divergence = j.at("divergence").get<std::string>();
      if (j.at("iterations").get<std::size_t>() != trace.iterations.size()) {
        throw Error("trace summary iteration count does not match its records");
      }
      saw_summary = true;
    } else {
      throw Error("trace line " + std::to_string(line_no) + ": unknown record '" + kind + "'");
    }
  }
  if (!saw_header || !saw_summary) throw Error("trace is missing its header or summary line");
  return trace;
}

}  // namespace doppler::netsim
