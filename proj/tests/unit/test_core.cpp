#include <doctest.h>

#include <map>
#include <set>
#include <utility>

#include "glidemini/model.hpp"
#include "glidemini/resources.hpp"
#include "glidemini/state_machine.hpp"
#include "support.hpp"

using namespace glidemini;
using testsupport::Gen;
using testsupport::R;

TEST_CASE("fits compares componentwise") {
  CHECK(fits(R(1, 1024, 0, 0), R(4, 8192, 1000, 0)));
  CHECK_FALSE(fits(R(4, 1024, 0, 0), R(2, 8192, 1000, 0)));
  CHECK(fits(R(0, 0, 0, 0), R(0, 0, 0, 0)));
  CHECK_FALSE(fits(R(0, 0, 0, 1), R(8, 8192, 1000, 0)));
}

TEST_CASE("carve subtracts and refuses underflow") {
  CHECK(carve(R(8, 8192, 1000, 1), R(2, 2048, 0, 1)) == R(6, 6144, 1000, 0));
  const auto x = R(3, 300, 30, 3);
  CHECK(carve(x, R(0, 0, 0, 0)) == x);
  CHECK_THROWS_AS(carve(R(1, 100), R(2, 100)), ResourceUnderflow);
}

TEST_CASE("property: carve agrees with fits and release inverts it") {
  Gen g(11);
  for (int i = 0; i < 5000; ++i) {
    const auto avail = g.resources();
    const auto req = g.resources();
    const bool ok = req.cores <= avail.cores && req.memory_mb <= avail.memory_mb && req.disk_mb <= avail.disk_mb &&
                    req.gpus <= avail.gpus;
    REQUIRE(fits(req, avail) == ok);
    if (ok) {
      const auto rest = carve(avail, req);
      REQUIRE(rest.is_valid());
      REQUIRE(release(rest, req) == avail);
      REQUIRE(rest + req == avail);
    } else {
      REQUIRE_THROWS_AS(carve(avail, req), ResourceUnderflow);
    }
  }
}

TEST_CASE("resource json round trip") {
  const auto r = R(8, 8192, 1000, 2);
  nlohmann::json j = r;
  CHECK(j.get<ResourceSpec>() == r);
  CHECK_THROWS(nlohmann::json({{"cores", -1}, {"memory_mb", 0}, {"disk_mb", 0}, {"gpus", 0}}).get<ResourceSpec>());
}

TEST_CASE("glidein transition examples") {
  CHECK(transition(GlideinState::Queued, GlideinEvent::NodeAssigned) == GlideinState::Starting);
  CHECK(transition(GlideinState::Running, GlideinEvent::JobFinishedNoneActive) == GlideinState::Registered);
  for (auto e : kAllGlideinEvents) CHECK_THROWS_AS(transition(GlideinState::Done, e), IllegalTransition);
}

namespace {

// Edge lists written out from the lifecycle descriptions, independent of the
// switch statements in state_machine.cpp.
std::map<std::pair<JobState, JobEvent>, JobState> job_edges() {
  return {
      {{JobState::Idle, JobEvent::Matched}, JobState::Matched},
      {{JobState::Matched, JobEvent::ClaimRefused}, JobState::Idle},
      {{JobState::Matched, JobEvent::Started}, JobState::Running},
      {{JobState::Running, JobEvent::Finished}, JobState::Completed},
      {{JobState::Running, JobEvent::Crashed}, JobState::Failed},
      {{JobState::Idle, JobEvent::Removed}, JobState::Removed},
  };
}

std::map<std::pair<GlideinState, GlideinEvent>, GlideinState> glidein_edges() {
  using S = GlideinState;
  using E = GlideinEvent;
  std::map<std::pair<S, E>, S> m = {
      {{S::Submitted, E::Queued}, S::Queued},
      {{S::Queued, E::NodeAssigned}, S::Starting},
      {{S::Starting, E::Registered}, S::Registered},
      {{S::Registered, E::JobStarted}, S::Running},
      {{S::Running, E::JobFinishedNoneActive}, S::Registered},
      {{S::Registered, E::Retire}, S::Retiring},
      {{S::Running, E::Retire}, S::Retiring},
      {{S::Retiring, E::Drained}, S::Done},
  };
  for (auto s : {S::Submitted, S::Queued, S::Starting, S::Registered, S::Running, S::Retiring})
    m[{s, E::Failed}] = S::Failed;
  return m;
}

}  // namespace

TEST_CASE("property: job transition table matches the lifecycle exactly") {
  const auto edges = job_edges();
  for (auto s : kAllJobStates)
    for (auto e : kAllJobEvents) {
      CAPTURE(to_string(s));
      CAPTURE(to_string(e));
      if (auto it = edges.find({s, e}); it != edges.end()) {
        CHECK(transition(s, e) == it->second);
      } else {
        CHECK_THROWS_AS(transition(s, e), IllegalTransition);
      }
    }
}

TEST_CASE("property: glidein transition table matches the lifecycle exactly") {
  const auto edges = glidein_edges();
  for (auto s : kAllGlideinStates)
    for (auto e : kAllGlideinEvents) {
      CAPTURE(to_string(s));
      CAPTURE(to_string(e));
      if (auto it = edges.find({s, e}); it != edges.end()) {
        CHECK(transition(s, e) == it->second);
      } else {
        CHECK_THROWS_AS(transition(s, e), IllegalTransition);
      }
    }
}

TEST_CASE("terminal and pressure predicates") {
  std::set<GlideinState> terminal, pressure;
  for (auto s : kAllGlideinStates) {
    if (is_terminal(s)) terminal.insert(s);
    if (counts_toward_pressure(s)) pressure.insert(s);
  }
  CHECK(terminal == std::set{GlideinState::Done, GlideinState::Failed});
  // queued plus running; a draining pilot no longer counts
  CHECK(pressure == std::set{GlideinState::Submitted, GlideinState::Queued, GlideinState::Starting,
                             GlideinState::Registered, GlideinState::Running});
  CHECK(is_terminal(JobState::Completed));
  CHECK(is_terminal(JobState::Failed));
  CHECK(is_terminal(JobState::Removed));
  CHECK_FALSE(is_terminal(JobState::Matched));
}

TEST_CASE("state names round trip") {
  for (auto s : kAllGlideinStates) CHECK(parse_glidein_state(to_string(s)) == s);
  for (auto s : kAllJobStates) CHECK(parse_job_state(to_string(s)) == s);
  for (auto e : kAllGlideinEvents) CHECK(parse_glidein_event(to_string(e)) == e);
  CHECK_FALSE(parse_glidein_state("Paused").has_value());
}

TEST_CASE("property: detected is present exactly in registered-and-later states") {
  Gen g(5);
  const auto edges = glidein_edges();
  auto has_detected = [](GlideinState s) {
    return s == GlideinState::Registered || s == GlideinState::Running || s == GlideinState::Retiring ||
           s == GlideinState::Done;
  };
  for (int walk = 0; walk < 2000; ++walk) {
    GlideinRecord rec;
    for (int step = 0; step < 12 && !is_terminal(rec.state); ++step) {
      std::vector<GlideinEvent> legal;
      for (auto e : kAllGlideinEvents)
        if (edges.contains({rec.state, e})) legal.push_back(e);
      const auto e = g.pick(legal);
      if (e == GlideinEvent::Registered) {
        rec.apply(e, R(8, 8192, 1000, 0));
      } else {
        rec.apply(e);
      }
      REQUIRE(rec.detected.has_value() == has_detected(rec.state));
    }
  }
  GlideinRecord starting;
  starting.state = GlideinState::Starting;
  CHECK_THROWS(starting.apply(GlideinEvent::Registered));  // registration needs detected resources
}

TEST_CASE("job apply follows the table and keeps one execution record") {
  Job j;
  j.apply(JobEvent::Matched);
  j.apply(JobEvent::Started);
  j.execution_record = ExecutionRecord{GlideinId{1}, 1, at_s(1), at_s(11)};
  j.apply(JobEvent::Finished);
  CHECK(j.state == JobState::Completed);
  CHECK(j.execution_record.has_value());
  CHECK_THROWS_AS(j.apply(JobEvent::Started), IllegalTransition);
}

TEST_CASE("canonical form sorts keys and drops whitespace") {
  nlohmann::json j = {{"b", 1}, {"a", {{"d", "x"}, {"c", 2}}}};
  CHECK(canonical(j) == R"({"a":{"c":2,"d":"x"},"b":1})");
}

TEST_CASE("entry descriptor validation") {
  EntryDescriptor e{"ce-1", "ce-1.glideinwms.org:9619", "ce-1.glideinwms.org", 8, 4, {"frontend"}};
  CHECK_NOTHROW(e.validate());
  CHECK(e.trusts("frontend"));
  CHECK_FALSE(e.trusts("other"));
  e.max_pressure = 0;
  CHECK_THROWS(e.validate());
}
