#include <doctest.h>

#include <sstream>

#include "neckcheck/cli.hpp"
#include "neckcheck/config.hpp"
#include "neckcheck/error.hpp"
#include "neckcheck/ingest.hpp"
#include "neckcheck/models.hpp"
#include "support.hpp"

using namespace neckcheck;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args, const std::string& input = "") {
    std::istringstream in(input);
    std::ostringstream out, err;
    const int code = run_cli(args, in, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

// A two-minute session and a lighter forest keep these tests quick.
const char* kSmallConfig =
    "# small session\n"
    "[synth]\nrepeat = 1\n"
    "[models]\nrf_trees = 20\ngb_rounds = 30\n";

struct SmallSession {
    std::filesystem::path dir;
    std::string config;
    std::string head, emg;

    SmallSession() {
        dir = testing::scratch("cli_session");
        config = (dir / "small.ini").string();
        testing::spit(config, kSmallConfig);
        const auto r = run({"synth", "--config", config, "--out", (dir / "s").string()});
        REQUIRE(r.code == 0);
        head = (dir / "s" / "head.csv").string();
        emg = (dir / "s" / "emg.csv").string();
    }
};

const SmallSession& session() {
    static const SmallSession s;
    return s;
}

}  // namespace

TEST_CASE("config dump round-trips") {
    const Config defaults;
    const auto text = dump_config(defaults);
    CHECK(dump_config(parse_config(text)) == text);
    CHECK(text.find("[models]") != std::string::npos);
    CHECK(text.find("rf_trees = 100") != std::string::npos);

    Config c = parse_config("[models]\nrf_trees = 7\nfamilies = linear, random_forest\n[synth]\nrepeat = 2\n");
    CHECK(c.models.hyper.forest_trees == 7);
    CHECK(c.models.families.size() == 2);
    CHECK(c.synth.script().total_s() == doctest::Approx(240.0));
    CHECK(dump_config(parse_config(dump_config(c))) == dump_config(c));
}

TEST_CASE("config rejects unknown keys and bad values, naming the key") {
    auto message = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ValidationError& e) {
            return std::string(e.what());
        }
        return std::string("accepted");
    };
    CHECK(message("[dsp]\nbandpass_orderr = 4\n").find("bandpass_orderr") != std::string::npos);
    CHECK(message("[nope]\nx = 1\n").find("nope") != std::string::npos);
    CHECK(message("[dsp]\nbandpass_order = 3\n").find("bandpass") != std::string::npos);
    CHECK(message("[dsp]\nbandpass_order = four\n").find("dsp.bandpass_order") != std::string::npos);
    CHECK(message("[sync]\ncalibration_s = 0.5\n").find("sync.calibration_s") != std::string::npos);
    CHECK(message("[models]\nfamily = svm\n").find("models.family") != std::string::npos);
    CHECK(message("[posture]\nbend_boundaries_deg = 5,4,30,40\n").find("posture") != std::string::npos);
    CHECK(message("[synth]\nscript = neutral:0\n").find("synth.script") != std::string::npos);
    CHECK(message("[dsp]\nsample_rate_hz = 500\nsample_rate_hz = 400\n") != "accepted");
}

TEST_CASE("seed override reaches synthesis and models") {
    Config c;
    c.override_seed(99);
    CHECK(c.synth.seed == 99);
    CHECK(c.models.hyper.seed == 99);
    CHECK(c.models.split.seed == 99);
}

TEST_CASE("cli usage errors") {
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"train", "only_one.csv", "--out", "m.json"}).code == 1);
    CHECK(run({"--help"}).code == 0);
    const auto cfg = run({"config"});
    CHECK(cfg.code == 0);
    CHECK(cfg.out == dump_config(Config{}));
}

TEST_CASE("synth is deterministic and reports durations") {
    const auto dir = testing::scratch("cli_synth");
    testing::spit(dir / "c.ini", kSmallConfig);
    const auto a = run({"synth", "--config", (dir / "c.ini").string(), "--seed", "7", "--out", (dir / "a").string()});
    const auto b = run({"synth", "--config", (dir / "c.ini").string(), "--seed", "7", "--out", (dir / "b").string()});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    for (const char* f : {"head.csv", "emg.csv", "labels.csv", "activation.csv"}) {
        CHECK(testing::slurp(dir / "a" / f) == testing::slurp(dir / "b" / f));
    }
    CHECK(a.out.find("duration_s 120.000") != std::string::npos);
    CHECK(a.out.find("neck_bend_3_s 8.000") != std::string::npos);
    const auto frames = ingest::read_head_csv(dir / "a" / "head.csv");
    CHECK(std::abs(frames.back().t_ms + 20.0 - 120000.0) <= 20.0);

    const auto c = run({"synth", "--config", (dir / "c.ini").string(), "--seed", "8", "--out", (dir / "c").string()});
    CHECK(testing::slurp(dir / "a" / "emg.csv") != testing::slurp(dir / "c" / "emg.csv"));
}

TEST_CASE("synth config errors exit 1 and name the key") {
    const auto dir = testing::scratch("cli_badcfg");
    testing::spit(dir / "bad.ini", "[synth]\nrepeats = 2\n");
    const auto r = run({"synth", "--config", (dir / "bad.ini").string(), "--out", (dir / "o").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("repeats") != std::string::npos);
    const auto missing = run({"synth", "--config", (dir / "absent.ini").string(), "--out", (dir / "o").string()});
    CHECK(missing.code == 2);
}

TEST_CASE("train writes a model and is deterministic") {
    const auto& s = session();
    const auto m1 = (s.dir / "m1.json").string();
    const auto m2 = (s.dir / "m2.json").string();
    const auto a = run({"train", "--config", s.config, s.head, s.emg, "--out", m1});
    const auto b = run({"train", "--config", s.config, s.head, s.emg, "--out", m2});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(testing::slurp(m1) == testing::slurp(m2));
    CHECK(a.out.substr(0, a.out.find("wrote")) == b.out.substr(0, b.out.find("wrote")));
    CHECK(a.out.find("family random_forest") != std::string::npos);
    CHECK(a.out.find("test r2 ") != std::string::npos);
    CHECK(models::load_model(m1).family() == models::Family::random_forest);

    const auto lin = run({"train", "--config", s.config, "--family", "linear", s.head, s.emg, "--out", m2});
    CHECK(lin.code == 0);
    CHECK(models::load_model(m2).family() == models::Family::linear);
}

TEST_CASE("train on a missing emg file names the path") {
    const auto& s = session();
    const auto r = run({"train", s.head, (s.dir / "no_such_emg.csv").string(), "--out", (s.dir / "x.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("no_such_emg.csv") != std::string::npos);
}

TEST_CASE("report lists every family and importances") {
    const auto& s = session();
    const auto path = (s.dir / "report.csv").string();
    const auto r = run({"report", "--config", s.config, s.head, s.emg, "--out", path});
    REQUIRE(r.code == 0);
    const auto rows = lines(testing::slurp(path));
    REQUIRE(rows.size() == 8);
    CHECK(rows[0] == "family,r2,mse");
    CHECK(rows[6] == "importance_roll,importance_pitch,importance_yaw");
    double sum = 0.0;
    std::istringstream imp(rows[7]);
    std::string cell;
    while (std::getline(imp, cell, ',')) sum += std::stod(cell);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    double last = 2.0;
    for (int i = 1; i <= 5; ++i) {
        const double r2 = std::stod(rows[static_cast<std::size_t>(i)].substr(rows[static_cast<std::size_t>(i)].find(',') + 1));
        CHECK(r2 <= last);
        last = r2;
    }
    const auto again = run({"report", "--config", s.config, s.head, s.emg, "--out", path});
    CHECK(again.out == r.out);
}

TEST_CASE("report on streams that never overlap fails with drop counts") {
    const auto dir = testing::scratch("cli_nooverlap");
    std::vector<ingest::HeadFrame> head;
    for (int i = 0; i < 500; ++i) head.push_back({100000.0 + 20.0 * i, 0, 0, 0});
    std::vector<ingest::EmgSample> emg;
    for (int i = 0; i < 5000; ++i) emg.push_back({2.0 * i, 0.0});
    ingest::write_head_csv(dir / "h.csv", head);
    ingest::write_emg_csv(dir / "e.csv", emg);
    const auto r = run({"report", (dir / "h.csv").string(), (dir / "e.csv").string(), "--out", (dir / "r.csv").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("500 of 500") != std::string::npos);
}

TEST_CASE("stream emits one line per frame and skips malformed lines") {
    const auto& s = session();
    const auto model = (s.dir / "stream_model.json").string();
    REQUIRE(run({"train", "--config", s.config, s.head, s.emg, "--out", model}).code == 0);

    auto body = lines(testing::slurp(s.head));
    body.erase(body.begin());
    body.resize(300);
    std::string input;
    for (const auto& l : body) input += l + "\n";
    const auto r = run({"stream", model}, input);
    CHECK(r.code == 0);
    const auto out = lines(r.out);
    REQUIRE(out.size() == body.size());
    CHECK(out[0].rfind("0,", 0) == 0);
    CHECK(out[0].substr(out[0].rfind(',') + 1) == "neutral");

    std::string broken;
    for (std::size_t i = 0; i < body.size(); ++i) broken += (i == 150 ? std::string("150,abc,1,2") : body[i]) + "\n";
    const auto b = run({"stream", model}, broken);
    CHECK(b.code == 0);
    CHECK(lines(b.out).size() == body.size() - 1);
    CHECK(b.err.find("line 151") != std::string::npos);

    // Far past the training range the forest still answers from its leaves.
    const auto m = models::load_model(model);
    const auto& forest = std::get<models::ForestModel>(m.params());
    double lo = 1e9, hi = -1e9;
    for (const auto& t : forest.trees) {
        for (const auto& n : t.nodes()) {
            if (n.feature < 0) {
                lo = std::min(lo, n.value);
                hi = std::max(hi, n.value);
            }
        }
    }
    const auto extreme = run({"stream", model}, "0,0,170,0\n");
    const auto cells = lines(extreme.out).at(0);
    const double env = std::stod(cells.substr(cells.find(',') + 1));
    CHECK(env >= lo - 1e-6);
    CHECK(env <= hi + 1e-6);
    CHECK(run({"stream", (s.dir / "nope.json").string()}).code == 2);
}

TEST_CASE("detect segments the session") {
    const auto& s = session();
    const auto path = (s.dir / "episodes.csv").string();
    const auto r = run({"detect", "--config", s.config, s.head, "--out", path});
    REQUIRE(r.code == 0);
    const auto rows = lines(testing::slurp(path));
    CHECK(rows[0] == "label,start_ms,end_ms,duration_s,mean_pitch_deg");
    CHECK(rows.size() == 13);
    double prev_end = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::istringstream ss(rows[i]);
        std::string label, start, end;
        std::getline(ss, label, ',');
        std::getline(ss, start, ',');
        std::getline(ss, end, ',');
        CHECK(std::stod(start) == prev_end);
        prev_end = std::stod(end);
    }
    CHECK(prev_end == 120000.0);

    const auto model = (s.dir / "detect_model.json").string();
    REQUIRE(run({"train", "--config", s.config, s.head, s.emg, "--out", model}).code == 0);
    const auto with_model = run({"detect", "--config", s.config, s.head, "--model", model, "--out", path});
    CHECK(with_model.out.find("strain_index ") != std::string::npos);
}

TEST_CASE("detect on constant neutral gives one episode") {
    const auto dir = testing::scratch("cli_neutral");
    std::vector<ingest::HeadFrame> head;
    for (int i = 0; i < 3000; ++i) head.push_back({20.0 * i, 0.2, -0.1, 0.3});
    ingest::write_head_csv(dir / "h.csv", head);
    const auto r = run({"detect", (dir / "h.csv").string(), "--out", (dir / "e.csv").string()});
    REQUIRE(r.code == 0);
    const auto rows = lines(testing::slurp(dir / "e.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].rfind("neutral,0,60000,60.000,", 0) == 0);
}
