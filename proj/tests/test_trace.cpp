#include <doctest.h>

#include <filesystem>
#include <random>

#include "robofp/rng.hpp"
#include "robofp/trace.hpp"

using namespace robofp;
namespace fs = std::filesystem;

namespace {

TraceErrorKind parse_error(std::string_view text) {
    try {
        parse_trace_csv(text);
    } catch (const TraceError &e) {
        return e.kind();
    }
    FAIL("expected a parse error");
    return TraceErrorKind::Io;
}

fs::path scratch_dir(const std::string &name) {
    auto dir = fs::temp_directory_path() / ("robofp_trace_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("parse two-packet trace") {
    const Trace t = parse_trace_csv("t,dir,size\n0.0,1,120\n0.01,-1,132");
    REQUIRE(t.packets.size() == 2);
    CHECK(t.packets[0] == PacketRecord{0.0, kOutgoing, 120});
    CHECK(t.packets[1] == PacketRecord{0.01, kIncoming, 132});
    CHECK(t.duration() == doctest::Approx(0.01));
}

TEST_CASE("parse errors map to named kinds") {
    CHECK(parse_error("time,dir,size\n0.0,1,10\n") == TraceErrorKind::MalformedHeader);
    CHECK(parse_error("t,dir,size\n0.0,0,10\n") == TraceErrorKind::BadDirection);
    CHECK(parse_error("t,dir,size\n0.0,2,10\n") == TraceErrorKind::BadDirection);
    CHECK(parse_error("t,dir,size\n0.0,1,0\n") == TraceErrorKind::SizeOutOfRange);
    CHECK(parse_error("t,dir,size\n0.0,1,1501\n") == TraceErrorKind::SizeOutOfRange);
    CHECK(parse_error("t,dir,size\n0.0,1\n") == TraceErrorKind::MalformedRow);
    CHECK(parse_error("t,dir,size\nabc,1,10\n") == TraceErrorKind::MalformedRow);
    CHECK(parse_error("t,dir,size\n0.0,1,12.5\n") == TraceErrorKind::MalformedRow);
}

TEST_CASE("out-of-order timestamps report the offending line") {
    try {
        parse_trace_csv("t,dir,size\n0.5,1,10\n0.4,-1,10\n");
        FAIL("expected NonMonotonicTime");
    } catch (const TraceError &e) {
        CHECK(e.kind() == TraceErrorKind::NonMonotonicTime);
        CHECK(e.line() == 3);
    }
}

TEST_CASE("explicit plus sign and CRLF are accepted") {
    const Trace t = parse_trace_csv("t,dir,size\r\n0.0,+1,10\r\n0.5,-1,20\r\n");
    REQUIRE(t.packets.size() == 2);
    CHECK(t.packets[0].dir == kOutgoing);
}

TEST_CASE("timestamps are made trace-relative") {
    const Trace t = parse_trace_csv("t,dir,size\n100.25,1,10\n100.75,-1,20\n");
    CHECK(t.packets[0].t == 0.0);
    CHECK(t.packets[1].t == doctest::Approx(0.5));
}

TEST_CASE("empty trace writes a header-only file") {
    Trace t;
    CHECK(write_trace_csv(t) == "t,dir,size\n");
    CHECK(parse_trace_csv("t,dir,size\n").packets.empty());
}

TEST_CASE("two-packet trace round-trips byte-identically") {
    const std::string text = write_trace_csv(parse_trace_csv("t,dir,size\n0.0,1,120\n0.01,-1,132"));
    CHECK(text == "t,dir,size\n0.000000,1,120\n0.010000,-1,132\n");
    CHECK(write_trace_csv(parse_trace_csv(text)) == text);
}

TEST_CASE("random 1000-packet traces round-trip exactly") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng{seed};
        Trace t;
        double now = 0.0;
        for (int i = 0; i < 1000; ++i) {
            t.packets.push_back({now, rng.bernoulli(0.5) ? kOutgoing : kIncoming, rng.uniform_int(1, kMtu)});
            now += rng.bernoulli(0.1) ? 0.0 : rng.uniform(0.0, 0.05);
        }
        const Trace back = parse_trace_csv(write_trace_csv(t));
        CHECK(back.packets == t.packets);
    }
}

TEST_CASE("format_fixed keeps six decimals and full precision") {
    CHECK(format_fixed(0.0) == "0.000000");
    CHECK(format_fixed(1.5) == "1.500000");
    CHECK(std::stod(format_fixed(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("manifest loading") {
    const auto dir = scratch_dir("manifest");
    Trace t = parse_trace_csv("t,dir,size\n0.0,1,120\n0.5,-1,300\n");
    std::vector<std::pair<std::string, ActionLabel>> rows;
    for (auto label : kAllActions) {
        for (int i = 0; i < 50; ++i) {
            const std::string file = std::string{to_string(label)} + "_" + std::to_string(i) + ".csv";
            write_trace_file(dir / file, t);
            rows.emplace_back(file, label);
        }
    }
    write_manifest(dir / "manifest.csv", rows);

    SUBCASE("balanced manifest") {
        const Dataset ds = load_dataset(dir / "manifest.csv");
        CHECK(ds.traces.size() == 200);
        CHECK(ds.class_counts() == std::array<std::size_t, 4>{50, 50, 50, 50});
        CHECK(ds.traces.front().trace_id == "PickAndPlace_0");
        CHECK(ds.traces.back().label == ActionLabel::PressKey);
    }
    SUBCASE("unknown label") {
        write_text_file(dir / "bad.csv", "path,label\nPickAndPlace_0.csv,wave\n");
        try {
            load_dataset(dir / "bad.csv");
            FAIL("expected UnknownLabel");
        } catch (const TraceError &e) {
            CHECK(e.kind() == TraceErrorKind::UnknownLabel);
        }
    }
    SUBCASE("missing file names the path") {
        write_text_file(dir / "missing.csv", "path,label\nnot_there.csv,PressKey\n");
        try {
            load_dataset(dir / "missing.csv");
            FAIL("expected MissingFile");
        } catch (const TraceError &e) {
            CHECK(e.kind() == TraceErrorKind::MissingFile);
            CHECK(std::string{e.what()}.find("not_there.csv") != std::string::npos);
        }
    }
    SUBCASE("empty manifest") {
        write_text_file(dir / "empty.csv", "path,label\n");
        try {
            load_dataset(dir / "empty.csv");
            FAIL("expected EmptyDataset");
        } catch (const TraceError &e) {
            CHECK(e.kind() == TraceErrorKind::EmptyDataset);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("action label names") {
    for (auto a : kAllActions) {
        CHECK(parse_action_label(to_string(a)) == a);
    }
    CHECK_FALSE(parse_action_label("wave").has_value());
}
