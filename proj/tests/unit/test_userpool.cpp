#include <doctest.h>

#include "glidemini/userpool.hpp"
#include "matching_oracle.hpp"
#include "support.hpp"

using namespace glidemini;
using testsupport::Gen;
using testsupport::R;

namespace {

struct PoolFixture {
  std::shared_ptr<Authority> auth = testsupport::test_authority(61);
  UserPool pool{PoolConfig{"frontend.glideinwms.org", secs(2), secs(10)}, auth};
  Token token = auth->issue("user", "frontend.glideinwms.org", Scope::JobSubmit, secs(3600), at_s(0));

  JobId submit(ResourceSpec req, SimTime now = at_s(0), Duration runtime = secs(10)) {
    return pool.submit_job({"user", req, runtime}, token, now).value();
  }
  void ep(std::uint64_t id, ResourceSpec remaining, SimTime now = at_s(0), bool retiring = false) {
    EpAd ad;
    ad.glidein_id = GlideinId{id};
    ad.client_id = "fe";
    ad.entry_id = "ce-1";
    ad.address = "ce-1.glideinwms.org:9619";
    ad.detected = remaining;
    ad.remaining = remaining;
    ad.retiring = retiring;
    pool.register_ep(ad, now);
  }
};

}  // namespace

TEST_CASE("submit_job") {
  PoolFixture f;
  auto id = f.pool.submit_job({"user", R(1, 1024), secs(10)}, f.token, at_s(0));
  REQUIRE(id);
  CHECK(f.pool.jobs().at(*id).state == JobState::Idle);
  auto compute = f.auth->issue("user", "frontend.glideinwms.org", Scope::ComputeCreate, secs(10), at_s(0));
  CHECK(f.pool.submit_job({"user", R(1, 1024), secs(10)}, compute, at_s(0)).error() == Reject::WrongScope);
  CHECK(f.pool.submit_job({"user", R(-1, 1024), secs(10)}, f.token, at_s(0)).error() == Reject::Malformed);
  CHECK(f.pool.submit_job({"user", R(1, 1024), secs(0)}, f.token, at_s(0)).error() == Reject::Malformed);

  PoolFixture g;
  std::vector<std::uint64_t> ids;
  for (int i = 0; i < 10; ++i) ids.push_back(g.submit(R(1, 1024)).value);
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == i + 1);
}

TEST_CASE("negotiate examples") {
  SUBCASE("packing") {
    PoolFixture f;
    f.ep(1, R(8, 8192));
    auto a = f.submit(R(1, 1024));
    auto b = f.submit(R(1, 1024));
    auto m = f.pool.negotiate(at_s(0));
    CHECK(m == std::vector<Match>{{a, GlideinId{1}}, {b, GlideinId{1}}});
    CHECK(f.pool.jobs().at(a).state == JobState::Matched);
  }
  SUBCASE("too big") {
    PoolFixture f;
    f.ep(1, R(2, 8192));
    auto a = f.submit(R(4, 1024));
    CHECK(f.pool.negotiate(at_s(0)).empty());
    CHECK(f.pool.jobs().at(a).state == JobState::Idle);
  }
  SUBCASE("first fit in FIFO order, checked against full enumeration") {
    PoolFixture f;
    f.ep(1, R(2, 8192));
    f.ep(2, R(4, 8192));
    auto a = f.submit(R(4, 1024), at_s(0));
    auto b = f.submit(R(1, 1024), at_s(1));
    const std::vector<ResourceSpec> jobs{R(4, 1024), R(1, 1024)};
    const std::vector<oracle::Ep> eps{{R(2, 8192)}, {R(4, 8192)}};
    auto all = oracle::enumerate(jobs, eps);
    REQUIRE(all.size() == 1);
    CHECK(all[0] == oracle::Assignment{1, 0});
    auto m = f.pool.negotiate(at_s(2));
    CHECK(m == std::vector<Match>{{a, GlideinId{2}}, {b, GlideinId{1}}});
  }
  SUBCASE("retiring ads take no work") {
    PoolFixture f;
    f.ep(1, R(8, 8192), at_s(0), true);
    f.submit(R(1, 1024));
    CHECK(f.pool.negotiate(at_s(0)).empty());
  }
  SUBCASE("paced") {
    PoolFixture f;
    f.pool.negotiate(at_s(0));
    CHECK_THROWS_AS(f.pool.negotiate(at_s(1)), std::logic_error);
  }
}

TEST_CASE("the cheap oracle agrees with full enumeration on small instances") {
  const std::vector<ResourceSpec> jt{R(1, 1024), R(2, 4096, 100), R(4, 2048, 0, 1)};
  const std::vector<oracle::Ep> et{{R(4, 8192, 1000)}, {R(2, 4096, 500, 1)}, {R(8, 8192, 1000), true}};
  std::size_t n = 0;
  oracle::for_each_instance(jt, et, 4, 2, [&](const auto& jobs, const auto& eps) {
    auto all = oracle::enumerate(jobs, eps);
    REQUIRE(all.size() == 1);
    REQUIRE(all[0] == oracle::first_fit(jobs, eps));
    ++n;
  });
  CHECK(n == (1 + 3 + 9 + 27 + 81) * (1 + 3 + 9));
}

TEST_CASE("property: random instances match the oracle, retiring included") {
  Gen g(62);
  auto auth = testsupport::test_authority(61);
  auto token = auth->issue("user", "frontend.glideinwms.org", Scope::JobSubmit, secs(3600), at_s(0));
  for (int i = 0; i < 400; ++i) {
    std::vector<ResourceSpec> jobs;
    std::vector<oracle::Ep> eps;
    for (auto k = g.range(0, 10); k > 0; --k) jobs.push_back(R(g.range(0, 4), g.range(0, 4096), g.range(0, 100), g.range(0, 1)));
    for (auto k = g.range(0, 4); k > 0; --k) eps.push_back({R(g.range(0, 8), g.range(0, 8192), g.range(0, 200), g.range(0, 1)), g.coin(0.2)});
    REQUIRE(oracle::negotiate(jobs, eps, auth, token) == oracle::first_fit(jobs, eps));
  }
}

TEST_CASE("expire_ads") {
  PoolFixture f;
  f.ep(1, R(8, 8192), at_s(0));
  f.ep(2, R(8, 8192), at_s(5));
  CHECK(f.pool.expire_ads(at_s(10)).empty());
  auto j = f.submit(R(1, 1024), at_s(0));
  f.pool.negotiate(at_s(10));
  REQUIRE(f.pool.jobs().at(j).matched_to == GlideinId{1});
  std::vector<JobId> requeued;
  CHECK(f.pool.expire_ads(at_s(11), &requeued) == std::vector<GlideinId>{GlideinId{1}});
  CHECK(requeued == std::vector<JobId>{j});
  CHECK(f.pool.jobs().at(j).state == JobState::Idle);
  requeued.clear();
  CHECK(f.pool.expire_ads(at_s(11), &requeued).empty());
  CHECK(requeued.empty());
  CHECK(f.pool.ads().contains(GlideinId{2}));
}

TEST_CASE("query") {
  PoolFixture f;
  auto empty = f.pool.query();
  for (auto s : kAllJobStates) CHECK(empty.job_counts.at(s) == 0);
  CHECK(empty.eps.empty());
  for (int i = 0; i < 10; ++i) f.submit(R(1, 1024));
  f.ep(3, R(8, 8192));
  auto s1 = f.pool.query();
  CHECK(s1.job_counts.at(JobState::Idle) == 10);
  CHECK(s1 == f.pool.query());
  nlohmann::json j = s1;
  CHECK(j.get<PoolSnapshot>() == s1);
}

TEST_CASE("claim lifecycle in the pool") {
  PoolFixture f;
  f.ep(1, R(8, 8192));
  auto j = f.submit(R(2, 1024));
  f.pool.negotiate(at_s(0));
  CHECK(f.pool.ads().at(GlideinId{1}).remaining == R(6, 7168));
  CHECK(f.pool.busy_glideins("fe") == std::map<std::string, std::int64_t>{{"ce-1", 1}});
  // a heartbeat that does not yet reflect the claim keeps the pending carve
  REQUIRE(f.pool.heartbeat(GlideinId{1}, R(8, 8192), false, at_s(1)));
  CHECK(f.pool.ads().at(GlideinId{1}).remaining == R(6, 7168));
  REQUIRE(f.pool.claim_accepted(j, GlideinId{1}, 1, at_s(1), R(6, 7168), at_s(1)));
  CHECK(f.pool.jobs().at(j).state == JobState::Running);
  CHECK(f.pool.claim_accepted(j, GlideinId{1}, 1, at_s(1), R(6, 7168), at_s(1)).error() == Reject::UnknownJob);
  ExecutionRecord rec{GlideinId{1}, 1, at_s(1), at_s(11)};
  CHECK(f.pool.job_finished(j, rec, false, R(8, 8192), at_s(11)).value() == JobState::Completed);
  CHECK(f.pool.jobs().at(j).execution_record == rec);
  CHECK(f.pool.job_finished(j, rec, false, R(8, 8192), at_s(11)).error() == Reject::UnknownJob);
  CHECK(f.pool.busy_glideins("fe").empty());
  CHECK(f.pool.heartbeat(GlideinId{9}, R(1, 1), false, at_s(12)).error() == Reject::UnknownGlidein);
}

TEST_CASE("claim refusal returns the job exactly once") {
  PoolFixture f;
  f.ep(1, R(8, 8192));
  auto j = f.submit(R(2, 1024));
  f.pool.negotiate(at_s(0));
  CHECK(f.pool.claim_refused(j, GlideinId{1}, R(8, 8192), at_s(1)));
  CHECK(f.pool.jobs().at(j).state == JobState::Idle);
  CHECK_FALSE(f.pool.claim_refused(j, GlideinId{1}, std::nullopt, at_s(1)));
  CHECK(f.pool.ads().at(GlideinId{1}).remaining == R(8, 8192));
}

TEST_CASE("a late claim acceptance after expiry re-attaches the job") {
  PoolFixture f;
  f.ep(1, R(8, 8192));
  auto j = f.submit(R(1, 1024));
  f.pool.negotiate(at_s(0));
  f.pool.expire_ads(at_s(20));
  REQUIRE(f.pool.jobs().at(j).state == JobState::Idle);
  REQUIRE(f.pool.claim_accepted(j, GlideinId{1}, 1, at_s(20), R(7, 7168), at_s(20)));
  CHECK(f.pool.jobs().at(j).state == JobState::Running);
  CHECK(f.pool.jobs().at(j).matched_to == GlideinId{1});
}

TEST_CASE("property: random pool histories keep job and ad bookkeeping consistent") {
  Gen g(63);
  for (int scenario = 0; scenario < 150; ++scenario) {
    PoolFixture f;
    std::map<GlideinId, ResourceSpec> capacity;
    std::map<std::pair<JobId, GlideinId>, std::uint64_t> slot_of;
    std::uint64_t next_slot = 1;
    for (int step = 0; step < 60; ++step) {
      const auto now = at_s(2 * step);
      const auto op = g.range(0, 6);
      if (op == 0) {
        f.submit(R(g.range(1, 4), g.range(1, 4096)), now);
      } else if (op == 1) {
        const auto id = GlideinId{static_cast<std::uint64_t>(g.range(1, 4))};
        capacity[id] = R(8, 16384);
        f.ep(id.value, capacity[id], now);
      } else if (op == 2) {
        f.pool.negotiate(now);
      } else if (op == 3) {
        for (const auto& [jid, job] : f.pool.jobs())
          if (job.state == JobState::Matched && g.coin()) {
            const auto gid = *job.matched_to;
            if (g.coin(0.8)) {
              REQUIRE(f.pool.claim_accepted(jid, gid, next_slot, now, R(0, 0), now));
              slot_of[{jid, gid}] = next_slot++;
            } else {
              REQUIRE(f.pool.claim_refused(jid, gid, std::nullopt, now));
            }
            break;
          }
      } else if (op == 4) {
        for (const auto& [jid, job] : f.pool.jobs())
          if (job.state == JobState::Running) {
            const auto gid = *job.matched_to;
            REQUIRE(f.pool.job_finished(jid, {gid, slot_of.at({jid, gid}), now, now}, g.coin(0.1), std::nullopt, now));
            break;
          }
      } else if (op == 5) {
        f.pool.expire_ads(now);
      } else {
        f.pool.deregister(GlideinId{static_cast<std::uint64_t>(g.range(1, 4))}, now);
      }
      for (const auto& [jid, job] : f.pool.jobs()) {
        const bool attached = job.state == JobState::Matched || job.state == JobState::Running;
        REQUIRE(job.matched_to.has_value() == attached);
        if (job.state == JobState::Matched) REQUIRE(f.pool.ads().contains(*job.matched_to));
        if (job.state == JobState::Completed) REQUIRE(job.execution_record.has_value());
      }
      for (const auto& [gid, ad] : f.pool.ads()) REQUIRE(ad.remaining.is_valid());
    }
  }
}
