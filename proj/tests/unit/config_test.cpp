#include <gtest/gtest.h>

#include <cstdlib>

#include "errmon/config.hpp"
#include "test_util.hpp"

using namespace errmon;

namespace {

std::string error_of(const std::string& text) {
  try {
    config_from(KeyValueFile::parse(text, "test.conf"));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kBase =
    "[network]\n"
    "internal = 10.0.0.0/24\n"
    "telescope = 10.0.0.240/28\n";

}  // namespace

TEST(Config, ParsesAllSections) {
  const std::string text = std::string(kBase) +
                           "impersonate = 10.0.0.50:22/tcp, 10.0.0.51:80\n"
                           "anonymization_key = 0xdeadbeef\n"
                           "[timers]\n"
                           "dt = 0.5\n"
                           "dt_impersonated = 0.05\n"
                           "p_d = 0.0001\n"
                           "d_max = 100\n"
                           "k_batch = 50\n"
                           "[switch]\n"
                           "dynamic_capacity = 10\n"
                           "[fsd]\n"
                           "store_duplicates = true\n"
                           "[control]\n"
                           "install_base = 0.004\n"
                           "[responder]\n"
                           "enabled = false\n";
  auto kv = KeyValueFile::parse(text, "x.conf");
  auto cfg = config_from(kv);
  EXPECT_NO_THROW(kv.reject_unused());
  EXPECT_EQ(cfg.network.internal_prefixes.size(), 1u);
  EXPECT_EQ(cfg.network.impersonation_set.size(), 2u);
  EXPECT_TRUE(cfg.network.is_impersonated({testutil::ip("10.0.0.51"), 80}, 6));
  EXPECT_EQ(cfg.network.anonymization_key, 0xdeadbeefu);
  EXPECT_DOUBLE_EQ(cfg.network.timers.detection_timeout, 0.5);
  EXPECT_EQ(cfg.network.timers.max_check_depth, 100u);
  EXPECT_EQ(cfg.network.timers.batch_size, 50u);
  EXPECT_EQ(cfg.switch_cfg.dynamic_capacity, 10u);
  EXPECT_TRUE(cfg.fsd.store_duplicates);
  EXPECT_DOUBLE_EQ(cfg.control.install_latency.base, 0.004);
  EXPECT_FALSE(cfg.responder.enabled);
}

TEST(Config, DefaultsMatchDocumentedValues) {
  Timers t;
  EXPECT_DOUBLE_EQ(t.detection_timeout, 1.0);
  EXPECT_DOUBLE_EQ(t.detection_timeout_impersonated, 0.070);
  EXPECT_DOUBLE_EQ(t.t_inst, 1.0);
  EXPECT_DOUBLE_EQ(t.check_period, 1e-5);
  EXPECT_EQ(t.max_check_depth, 10u);
  EXPECT_DOUBLE_EQ(t.clean_fraction, 1e-3);
  EXPECT_EQ(t.batch_size, 200u);
  EXPECT_NO_THROW(t.validate());
}

TEST(Config, ZeroAlphaRejectedWithLineNumber) {
  const auto err = error_of(std::string(kBase) + "[timers]\nalpha_ht = 0\n");
  EXPECT_NE(err.find("test.conf:5:"), std::string::npos) << err;
  EXPECT_NE(err.find("alpha_ht"), std::string::npos) << err;
}

TEST(Config, TimerInvariants) {
  EXPECT_NE(error_of(std::string(kBase) + "[timers]\nalpha_ht = 1.5\n"), "");
  EXPECT_NE(error_of(std::string(kBase) + "[timers]\ndt = 0.05\ndt_impersonated = 0.07\n"), "");
  EXPECT_NE(error_of(std::string(kBase) + "[timers]\np_d = -1\n"), "");
  EXPECT_NE(error_of(std::string(kBase) + "[timers]\nd_max = 0\n"), "");
}

TEST(Config, SyntaxErrorsNameTheLine) {
  EXPECT_NE(error_of("[network\n").find("test.conf:1:"), std::string::npos);
  EXPECT_NE(error_of("[network]\ninternal\n").find("test.conf:2:"), std::string::npos);
  EXPECT_NE(error_of("key = 1\n").find("test.conf:1:"), std::string::npos);
  EXPECT_NE(error_of("[timers]\ndt = 1\ndt = 2\n").find("test.conf:3:"), std::string::npos);
  EXPECT_NE(error_of("[timers]\ndt = fast\n").find("test.conf:2:"), std::string::npos);
  EXPECT_NE(error_of("[network]\ninternal = 10.0.0.0/99\n").find("test.conf:2:"), std::string::npos);
}

TEST(Config, NetworkInvariants) {
  EXPECT_NE(error_of("[network]\ninternal = 10.0.0.0/24\ntelescope = 10.1.0.0/28\n").find("telescope"),
            std::string::npos);
  EXPECT_NE(error_of("[network]\ninternal = 10.0.0.0/24\nimpersonate = 8.8.8.8:53/udp\n").find("not internal"),
            std::string::npos);
  EXPECT_NE(error_of("[network]\ninternal = 10.0.0.0/24\nimpersonate = 10.0.0.1\n"), "");
}

TEST(Config, UnknownKeysReported) {
  auto kv = KeyValueFile::parse(std::string(kBase) + "[timers]\nspeed = 3\n", "u.conf");
  config_from(kv);
  try {
    kv.reject_unused();
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("u.conf:5: unknown key 'speed'"), std::string::npos) << e.what();
  }
}

TEST(Config, EnvironmentOverridesKey) {
  ::setenv(kAnonKeyEnv, "0badc0de", 1);
  auto cfg = config_from(KeyValueFile::parse(std::string(kBase) + "anonymization_key = 1\n", "e.conf"));
  ::unsetenv(kAnonKeyEnv);
  EXPECT_EQ(cfg.network.anonymization_key, 0x0badc0deu);
  EXPECT_FALSE(parse_hex_key("123456789"));
  EXPECT_FALSE(parse_hex_key("xyz"));
  EXPECT_EQ(parse_hex_key("0xff"), 0xffu);
}

TEST(Config, WhitelistFile) {
  auto wl = parse_whitelist("# services\n93.184.216.34,443\n1.1.1.1, 53  # dns\n", "wl");
  ASSERT_EQ(wl.size(), 2u);
  EXPECT_EQ(wl[1].port, 53);
  EXPECT_THROW(parse_whitelist("1.1.1.1\n", "wl"), ConfigError);
  EXPECT_THROW(parse_whitelist("1.1.1.1,70000\n", "wl"), ConfigError);
  Config cfg = testutil::small_config();
  cfg.switch_cfg.whitelist = {{testutil::ip("10.0.0.5"), 80}};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.switch_cfg.whitelist_internal = true;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(AddressIndex, DenseNumberingOverMergedPrefixes) {
  AddressIndex idx({*Cidr::parse("10.0.1.0/24"), *Cidr::parse("10.0.0.0/24"), *Cidr::parse("10.0.0.128/25")});
  EXPECT_EQ(idx.size(), 512u);
  EXPECT_EQ(idx.index_of(testutil::ip("10.0.0.0")), 0u);
  EXPECT_EQ(idx.index_of(testutil::ip("10.0.1.5")), 261u);
  EXPECT_FALSE(idx.index_of(testutil::ip("10.0.2.0")));
  EXPECT_EQ(idx.address_at(261), testutil::ip("10.0.1.5"));
}
