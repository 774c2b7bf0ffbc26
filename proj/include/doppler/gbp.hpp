#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "doppler/convergence.hpp"
#include "doppler/delivery.hpp"
#include "doppler/gaussian.hpp"
#include "doppler/problem.hpp"

namespace doppler::gbp {

/// Sign used when turning the sender's prior mean into the message mean.
///
/// The pairwise-sum model r = f_i + f_j + n gives eta = r - m. The
/// `literal_plus` form (eta = r + m) exists only so a test can show that it
/// breaks agreement with the centralized estimate.
enum class MeanConvention { measurement_minus_prior, literal_plus };

struct MessageInit {
  double precision = 1.0;
  double mean = 0.0;
};

/// Initial inbox contents. Precision must be >= 0; 0 is the uninformative
/// start.
struct Init {
  MessageInit uniform;
  std::map<DirectedLink, MessageInit> per_link;

  static Init uninformative() { return {{0.0, 0.0}, {}}; }
  MessageInit for_link(DirectedLink link) const;
};

/// Message j -> i from the sender's leave-one-out information sums.
///
/// `prior_precision` Q and `prior_weighted` W are the sums of precision and
/// precision * eta over messages into j from every neighbor except i. Q = 0
/// gives the uninformative message.
template <MeanConvention C = MeanConvention::measurement_minus_prior>
GaussianMessage combine_message(double noise_variance, double measurement, double prior_precision,
                                double prior_weighted, std::uint64_t stamp) {
  if (!(prior_precision > 0.0)) return {0.0, 0.0, stamp};
  const double prior_mean = prior_weighted / prior_precision;
  const double precision = 1.0 / (noise_variance + 1.0 / prior_precision);
  const double eta = C == MeanConvention::measurement_minus_prior ? measurement - prior_mean
                                                                  : measurement + prior_mean;
  return {precision, precision * eta, stamp};
}

/// Message sent by the anchor, whose value is known exactly.
inline GaussianMessage anchor_message(double noise_variance, double measurement,
                                      double anchor_value, std::uint64_t stamp) {
  const double precision = 1.0 / noise_variance;
  return {precision, precision * (measurement - anchor_value), stamp};
}

/// Product of incoming messages.
Belief combine_belief(const std::vector<GaussianMessage>& incoming);

/// Classical Gaussian BP with one distinct message per directed edge.
///
/// An iteration is: emit() computes every outgoing message from the current
/// inbox snapshot, the caller delivers some of them through absorb(), then
/// finish_iteration() recomputes beliefs. The anchor sends exact messages
/// and never updates its own belief.
template <MeanConvention C = MeanConvention::measurement_minus_prior>
class BasicEngine {
 public:
  using Payload = GaussianMessage;

  BasicEngine(Problem problem, Init init);

  const Problem& problem() const { return problem_; }
  std::uint64_t iteration() const { return iteration_; }

  const std::vector<Belief>& beliefs() const { return beliefs_; }
  const Belief& belief(NodeId n) const { return beliefs_[problem_.index_of(n)]; }
  const std::vector<GaussianMessage>& inbox() const { return inbox_; }
  const GaussianMessage& inbox(NodeId receiver, NodeId sender) const;

  /// Message sender -> receiver computed from the current inbox, stamped
  /// with the next iteration index.
  GaussianMessage compute_message(NodeId sender, NodeId receiver) const;
  Belief compute_belief(NodeId n) const;

  std::vector<netsim::Outbound<Payload>> emit() const;
  /// Stores the message unless the slot already holds a newer stamp.
  bool absorb(DirectedLink link, const Payload& payload);
  void finish_iteration();

  /// emit + absorb of delivered_now messages + finish_iteration. Delayed
  /// messages are handed back for the caller to queue.
  std::vector<netsim::Deferred<Payload>> step(const netsim::DeliveryReport& report);

  /// Distinct messages transmitted per iteration: sum of degrees.
  std::size_t messages_per_iteration() const { return problem_.slot_count(); }

  /// Moves to a new topology. Slots of surviving directed edges keep their
  /// contents; new slots start from `init`.
  void rebind(Problem next);

 private:
  GaussianMessage message_from_slot(std::size_t sender, std::size_t out_slot,
                                    std::uint64_t stamp) const;
  void refresh_beliefs();

  Problem problem_;
  Init init_;
  std::vector<GaussianMessage> inbox_;  // slot s of u: message neighbor -> u
  std::vector<Belief> beliefs_;
  std::uint64_t iteration_ = 0;
};

using Engine = BasicEngine<MeanConvention::measurement_minus_prior>;

/// Directed messages per iteration on `problem`: 2|E|.
std::size_t message_count_per_iteration(const Problem& problem);

using doppler::has_converged;

}  // namespace doppler::gbp
