#include <doctest.h>

#include <cmath>

#include "neckcheck/error.hpp"
#include "neckcheck/posture.hpp"
#include "neckcheck/rng.hpp"
#include "support.hpp"

using namespace neckcheck;
using namespace neckcheck::posture;

namespace {

std::vector<LabeledFrame> frames_from(const std::vector<std::pair<double, double>>& pitch_spans, double rate = 50.0) {
    // (seconds, pitch) spans, classified with hysteresis.
    std::vector<ingest::HeadFrame> head;
    double t = 0.0;
    for (const auto& [seconds, pitch] : pitch_spans) {
        const auto n = static_cast<int>(std::lround(seconds * rate));
        for (int i = 0; i < n; ++i) {
            head.push_back({t, 0.0, pitch, 0.0});
            t += 1000.0 / rate;
        }
    }
    return classify_stream(head, Thresholds{});
}

void check_partition(const std::vector<Episode>& eps, const std::vector<LabeledFrame>& frames) {
    REQUIRE(!eps.empty());
    CHECK(eps.front().start_ms == frames.front().t_ms);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        CHECK(eps[i].start_ms < eps[i].end_ms);
        CHECK(eps[i].duration_s == doctest::Approx((eps[i].end_ms - eps[i].start_ms) / 1000.0));
        CHECK(eps[i].first_frame == covered);
        covered += eps[i].frame_count;
        if (i > 0) {
            CHECK(eps[i].start_ms == eps[i - 1].end_ms);
            CHECK(eps[i].label != eps[i - 1].label);
        }
    }
    CHECK(covered == frames.size());
}

}  // namespace

TEST_CASE("label vocabulary") {
    for (auto l : {Label::neutral, Label::neck_bend_1, Label::neck_bend_2, Label::neck_bend_3, Label::neck_bend_4,
                   Label::sustained_flexion}) {
        CHECK(label_from_string(to_string(l)) == l);
    }
    CHECK(to_string(Label::neck_bend_3) == "neck_bend_3");
    CHECK(to_string(Label::sustained_flexion) == "sustained_flexion");
    CHECK_FALSE(label_from_string("hunch").has_value());
}

TEST_CASE("threshold validation") {
    Thresholds t;
    CHECK_NOTHROW(validate(t));
    t.bend_boundaries_deg = {5, 17.5, 17.5, 40};
    CHECK_THROWS_AS(validate(t), ValidationError);
    t = {};
    t.hysteresis_deg = -1;
    CHECK_THROWS_AS(validate(t), ValidationError);
    t = {};
    t.sustain_s = 0;
    CHECK_THROWS_AS(validate(t), ValidationError);
}

TEST_CASE("frame classification") {
    const Thresholds t;
    CHECK(classify_frame(0.0, t, std::nullopt) == Label::neutral);
    CHECK(classify_frame(20.0, t, Label::neutral) == Label::neck_bend_2);
    CHECK(classify_frame(-30.0, t, std::nullopt) == Label::neutral);
    CHECK(classify_frame(90.0, t, std::nullopt) == Label::neck_bend_4);
    CHECK(classify_frame(17.5, t, std::nullopt) == Label::neck_bend_2);
    // Inside the dead band the previous level holds.
    CHECK(classify_frame(18.0, t, Label::neck_bend_1) == Label::neck_bend_1);
    CHECK(classify_frame(19.6, t, Label::neck_bend_1) == Label::neck_bend_2);
    CHECK(classify_frame(16.0, t, Label::neck_bend_2) == Label::neck_bend_2);
    CHECK(classify_frame(15.0, t, Label::neck_bend_2) == Label::neck_bend_1);
    CHECK(classify_frame(18.0, t, Label::sustained_flexion) == Label::neck_bend_2);
}

TEST_CASE("oscillation across a boundary keeps the previous label") {
    const Thresholds t;
    std::optional<Label> prev = Label::neck_bend_1;
    for (int i = 0; i < 50; ++i) {
        prev = classify_frame(i % 2 ? 18.0 : 17.0, t, prev);
        CHECK(*prev == Label::neck_bend_1);
    }
}

TEST_CASE("oscillation smaller than the hysteresis never changes the label") {
    const Thresholds t;
    Xoshiro256 rng(4);
    for (double b : t.bend_boundaries_deg) {
        for (int trial = 0; trial < 50; ++trial) {
            const double amp = t.hysteresis_deg * rng.uniform() * 0.999;
            std::optional<Label> prev;
            std::optional<Label> first;
            for (int i = 0; i < 40; ++i) {
                const double pitch = b + amp * (2.0 * rng.uniform() - 1.0);
                prev = classify_frame(pitch, t, prev);
                if (!first) first = prev;
                CHECK(*prev == *first);
            }
        }
    }
}

TEST_CASE("classification is monotone in pitch for a fixed previous label") {
    const Thresholds t;
    for (std::optional<Label> prev : {std::optional<Label>{}, std::optional<Label>{Label::neutral},
                                      std::optional<Label>{Label::neck_bend_2}, std::optional<Label>{Label::neck_bend_4},
                                      std::optional<Label>{Label::sustained_flexion}}) {
        int last = -1;
        for (double p = -20.0; p <= 80.0; p += 0.05) {
            const int level = *bend_level(classify_frame(p, t, prev));
            CHECK(level >= last);
            last = level;
        }
    }
}

TEST_CASE("constant neutral gives one episode spanning the session") {
    const auto frames = frames_from({{60.0, 0.0}});
    const auto eps = segment_episodes(frames, Thresholds{}, 0.5);
    REQUIRE(eps.size() == 1);
    CHECK(eps[0].label == Label::neutral);
    CHECK(eps[0].duration_s == doctest::Approx(60.0));
    check_partition(eps, frames);
}

TEST_CASE("short blips are absorbed") {
    auto frames = frames_from({{5.0, 0.0}, {0.1, 12.0}, {5.0, 0.0}});
    const auto eps = segment_episodes(frames, Thresholds{}, 0.5);
    REQUIRE(eps.size() == 1);
    CHECK(eps[0].label == Label::neutral);
    CHECK(eps[0].frame_count == frames.size());

    // A blip at the very start goes to the following episode.
    frames = frames_from({{0.1, 12.0}, {5.0, 0.0}});
    const auto lead = segment_episodes(frames, Thresholds{}, 0.5);
    REQUIRE(lead.size() == 1);
    CHECK(lead[0].start_ms == 0.0);
}

TEST_CASE("bend ladder segments into levels") {
    const auto frames = frames_from({{5, 0}, {5, 10}, {5, 0}, {5, 25}, {5, 0}, {5, 40}, {5, 0}, {5, 55}, {5, 0}});
    const auto eps = segment_episodes(frames, Thresholds{}, 0.5);
    check_partition(eps, frames);
    REQUIRE(eps.size() == 9);
    CHECK(eps[1].label == Label::neck_bend_1);
    CHECK(eps[3].label == Label::neck_bend_2);
    CHECK(eps[5].label == Label::neck_bend_3);
    CHECK(eps[7].label == Label::neck_bend_4);
    CHECK(eps[3].start_ms == 15000.0);
    CHECK(eps[3].end_ms == 20000.0);
    CHECK(eps[3].mean_pitch_deg == doctest::Approx(25.0));
}

TEST_CASE("long flexion becomes sustained") {
    const auto frames = frames_from({{5, 0}, {6, 25}, {6, 40}, {5, 0}, {12, 10}, {5, 0}});
    const auto eps = segment_episodes(frames, Thresholds{}, 0.5);
    check_partition(eps, frames);
    REQUIRE(eps.size() == 5);
    CHECK(eps[1].label == Label::sustained_flexion);
    CHECK(eps[1].duration_s == doctest::Approx(12.0));
    CHECK(eps[1].mean_pitch_deg == doctest::Approx(32.5));
    // Long but shallow: mean pitch 10 is under the 15 degree floor.
    CHECK(eps[3].label == Label::neck_bend_1);
}

TEST_CASE("empty stream") { CHECK(segment_episodes({}, Thresholds{}, 0.5).empty()); }

TEST_CASE("expand episodes returns one label per frame") {
    const auto frames = frames_from({{3, 0}, {3, 30}, {3, 0}});
    const auto eps = segment_episodes(frames, Thresholds{}, 0.5);
    const auto labels = expand_episodes(eps);
    REQUIRE(labels.size() == frames.size());
    CHECK(labels[0] == Label::neutral);
    CHECK(labels[200] == Label::neck_bend_2);
}

TEST_CASE("strain index") {
    std::vector<ingest::AlignedRecord> below, above;
    for (int i = 0; i <= 500; ++i) {
        below.push_back({20.0 * i, 0, 0, 0, 0.1});
        above.push_back({20.0 * i, 0, 0, 0, 1.25});
    }
    CHECK(strain_index(below, 0.25) == 0.0);
    CHECK(strain_index(above, 0.25) == doctest::Approx(10.0).epsilon(1e-9));

    Xoshiro256 rng(6);
    std::vector<ingest::AlignedRecord> r;
    for (int i = 0; i < 400; ++i) r.push_back({20.0 * i + rng.below(5), 0, 0, 0, rng.uniform()});
    const std::vector<ingest::AlignedRecord> head(r.begin(), r.begin() + 150);
    const std::vector<ingest::AlignedRecord> tail(r.begin() + 149, r.end());
    CHECK(strain_index(head, 0.3) + strain_index(tail, 0.3) == doctest::Approx(strain_index(r, 0.3)).epsilon(1e-12));
    auto bumped = r;
    bumped[77].envelope += 0.5;
    CHECK(strain_index(bumped, 0.3) >= strain_index(r, 0.3));
}

TEST_CASE("tracker labels online") {
    PostureTracker tracker{Thresholds{}};
    std::vector<Label> out;
    for (int i = 0; i < 50 * 15; ++i) out.push_back(tracker.update({20.0 * i, 0, i < 100 ? 0.0 : 30.0, 0}));
    CHECK(out[0] == Label::neutral);
    CHECK(out[150] == Label::neck_bend_2);
    CHECK(out[100 + 499] == Label::neck_bend_2);
    CHECK(out[100 + 500] == Label::sustained_flexion);
    CHECK(tracker.update({20.0 * 750, 0, 0, 0}) == Label::neutral);
    CHECK(tracker.update({20.0 * 751, 0, 30, 0}) == Label::neck_bend_2);
}

TEST_CASE("labels and episodes csv") {
    const auto dir = testing::scratch("posture_csv");
    write_labels_csv(dir / "l.csv", {0, 20, 40}, {Label::neutral, Label::neck_bend_4, Label::sustained_flexion});
    const auto rows = read_labels_csv(dir / "l.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].first == 20.0);
    CHECK(rows[2].second == Label::sustained_flexion);
    CHECK(testing::slurp(dir / "l.csv").rfind("t_ms,posture_label\n", 0) == 0);

    const auto frames = frames_from({{2, 0}, {2, 30}});
    write_episodes_csv(dir / "e.csv", segment_episodes(frames, Thresholds{}, 0.5));
    CHECK(testing::slurp(dir / "e.csv") ==
          "label,start_ms,end_ms,duration_s,mean_pitch_deg\n"
          "neutral,0,2000,2.000,0.000000\n"
          "neck_bend_2,2000,4000,2.000,30.000000\n");
}
