#include <gtest/gtest.h>

#include "errmon/control.hpp"
#include "test_util.hpp"

using namespace errmon;
using testutil::ip;

namespace {

/// Records every call; fails the first `fail_first` calls.
class FakeChannel : public SouthboundChannel {
 public:
  std::vector<std::size_t> install_sizes;
  std::vector<std::size_t> delete_sizes;
  int fail_first = 0;

  CallResult install(std::span<const MatRule> batch, Seconds) override {
    install_sizes.push_back(batch.size());
    return result(batch.size());
  }
  CallResult remove(std::span<const RuleDelete> batch, Seconds) override {
    delete_sizes.push_back(batch.size());
    return result(batch.size());
  }

 private:
  CallResult result(std::size_t n) {
    const bool ok = calls_++ >= fail_first;
    return {ok, ok ? n : 0, 0, 0.001};
  }
  int calls_ = 0;
};

MatRule rule_for(std::uint32_t i, RuleSide side = RuleSide::MatchAsDst) {
  MatRule r;
  r.key = {{Ipv4(0x0a000000u + (i % 250)), static_cast<std::uint16_t>(1000 + i), 6}, side};
  return r;
}

struct Plane {
  Config cfg = testutil::small_config();
  FakeChannel channel;
  ControlPlane cp{cfg.network, cfg.control, cfg.switch_cfg, channel};
};

}  // namespace

TEST(Control, ThousandOpsInFiveBatches) {
  Plane p;
  for (std::uint32_t i = 0; i < 1000; ++i) ASSERT_TRUE(p.cp.enqueue_install(rule_for(i), 0));
  Seconds t = 0;
  int calls = 0;
  while (!p.cp.queue().empty()) {
    auto report = p.cp.drain_and_apply(t);
    ASSERT_EQ(report.installs, 200u);
    ++calls;
    t = report.completes_at;
    p.cp.complete(t);
  }
  EXPECT_EQ(calls, 5);
  EXPECT_EQ(p.channel.install_sizes, std::vector<std::size_t>(5, 200));
  EXPECT_EQ(p.cp.stats().rules_installed, 1000u);
}

TEST(Control, EmptyQueueMakesNoCall) {
  Plane p;
  auto report = p.cp.drain_and_apply(1.0);
  EXPECT_EQ(report.ops_applied(), 0u);
  EXPECT_FALSE(p.cp.busy());
  EXPECT_TRUE(p.channel.install_sizes.empty());
  EXPECT_TRUE(p.channel.delete_sizes.empty());
}

TEST(Control, BusyLoopWaitsForCompletion) {
  Plane p;
  p.cp.enqueue_install(rule_for(1), 0);
  p.cp.enqueue_install(rule_for(2), 0);
  auto first = p.cp.drain_and_apply(0);
  EXPECT_TRUE(p.cp.busy());
  EXPECT_DOUBLE_EQ(*p.cp.completes_at(), first.completes_at);
  p.cp.enqueue_install(rule_for(3), 0.0001);
  EXPECT_EQ(p.cp.drain_and_apply(0.0002).ops_applied(), 0u);
  auto syncs = p.cp.complete(first.completes_at);
  // Both installs name internal hosts, so both reach the liveness bitmap.
  ASSERT_EQ(syncs.size(), 2u);
  EXPECT_EQ(syncs[0].event, RuleEvent::Installed);
  EXPECT_DOUBLE_EQ(syncs[0].at, first.completes_at);
  EXPECT_EQ(p.cp.drain_and_apply(first.completes_at).installs, 1u);
}

TEST(Control, MixedBatchIssuesOneCallPerKind) {
  Plane p;
  p.cp.enqueue_install(rule_for(1), 0);
  std::vector<IdleNotification> idle{{rule_for(2).key, 0, 7}, {rule_for(3).key, 0, 8}};
  p.cp.on_idle_notifications(idle, 0);
  auto report = p.cp.drain_and_apply(0);
  EXPECT_EQ(report.installs, 1u);
  EXPECT_EQ(report.deletes, 2u);
  EXPECT_DOUBLE_EQ(report.completes_at, 0.002);
  EXPECT_EQ(p.channel.install_sizes.size(), 1u);
  EXPECT_EQ(p.channel.delete_sizes, std::vector<std::size_t>{2});
}

TEST(Control, DuplicateAndWhitelistNotificationsIgnored) {
  Plane p;
  p.cfg.switch_cfg.whitelist = {{ip("93.184.216.34"), 443}};
  ControlPlane cp(p.cfg.network, p.cfg.control, p.cfg.switch_cfg, p.channel);
  const RuleKey wl{{ip("93.184.216.34"), 443, 6}, RuleSide::MatchAsDst};
  std::vector<IdleNotification> idle{{rule_for(5).key, 0, 1}, {rule_for(5).key, 0, 1}, {wl, 0, 2}};
  cp.on_idle_notifications(idle, 0);
  EXPECT_EQ(cp.queue().size(), 1u);
  EXPECT_EQ(cp.stats().duplicate_notifications, 1u);
  EXPECT_EQ(cp.stats().whitelist_notifications, 1u);
  // After the delete completes the same key may be reported again.
  cp.complete(cp.drain_and_apply(0).completes_at);
  cp.on_idle_notifications(std::span(idle).first(1), 1);
  EXPECT_EQ(cp.queue().size(), 1u);
}

TEST(Control, FailedCallRetriedWithBackoff) {
  Plane p;
  p.channel.fail_first = 2;
  p.cp.enqueue_install(rule_for(1), 0);
  auto r1 = p.cp.drain_and_apply(0);
  EXPECT_EQ(r1.requeued, 1u);
  p.cp.complete(r1.completes_at);
  EXPECT_NEAR(p.cp.ready_at(), 0.001 + 0.01, 1e-12);
  EXPECT_EQ(p.cp.drain_and_apply(0.005).ops_applied() + p.channel.install_sizes.size(), 1u);
  auto r2 = p.cp.drain_and_apply(p.cp.ready_at());
  EXPECT_EQ(r2.requeued, 1u);
  p.cp.complete(r2.completes_at);
  // Second failure doubles the wait.
  EXPECT_NEAR(p.cp.ready_at() - r2.completes_at, 0.02, 1e-12);
  auto r3 = p.cp.drain_and_apply(p.cp.ready_at());
  EXPECT_EQ(r3.installs, 1u);
  EXPECT_EQ(p.cp.stats().failed_calls, 2u);
}

TEST(Control, OpAbandonedAfterMaxAttempts) {
  Plane p;
  p.channel.fail_first = 100;
  p.cp.enqueue_install(rule_for(1), 0);
  Seconds t = 0;
  for (int i = 0; i < 5 && !p.cp.queue().empty(); ++i) {
    auto r = p.cp.drain_and_apply(std::max(t, p.cp.ready_at()));
    t = r.completes_at;
    p.cp.complete(t);
  }
  EXPECT_EQ(p.channel.install_sizes.size(), 3u);
  EXPECT_EQ(p.cp.stats().abandoned_ops, 1u);
}

TEST(Control, SwitchChannelAppliesToTheSwitch) {
  Config cfg = testutil::small_config();
  SwitchSim sw(cfg.network, cfg.switch_cfg, cfg.control.install_latency, cfg.control.delete_latency);
  SwitchChannel ch(sw);
  ControlPlane cp(cfg.network, cfg.control, cfg.switch_cfg, ch);
  for (const auto& r : rules_for_responder({ip("10.0.0.9"), 80, 6}, 10)) cp.enqueue_install(r, 0);
  auto report = cp.drain_and_apply(0);
  EXPECT_EQ(sw.rule_count(), 2u);
  EXPECT_DOUBLE_EQ(report.completes_at, cfg.control.install_latency.call_latency(2));
  EXPECT_DOUBLE_EQ(report.per_rule_install, cfg.control.install_latency.per_rule_latency(2));
}

TEST(LatencyModel, BatchingAmortizesBaseCost) {
  LatencyModel m;
  EXPECT_GT(m.per_rule_latency(1), 10 * m.per_rule_latency(200));
  EXPECT_GT(m.per_rule_latency(10000), m.per_rule_latency(200));
  EXPECT_DOUBLE_EQ(m.per_rule_latency(0), 0.0);
}
