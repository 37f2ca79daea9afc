#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gar/dataset_io.hpp"

using namespace gar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("gar_test_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

TaskSpec tiny_spec() {
    TaskSpec s;
    s.rule = LabelRule::Majority;
    s.num_actions = 3;
    s.num_activities = 3;
    s.persons_min = 2;
    s.persons_max = 4;
    s.timesteps = 3;
    s.obs_dim = 4;
    s.latent_modes = 2;
    s.noise_sigma = 0.1;
    s.seed = 77;
    return s;
}

std::size_t count_lines(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

} // namespace

TEST_SUITE_BEGIN("dataset_io");

TEST_CASE("scene write/read round trip is value-exact") {
    TempDir dir("roundtrip");
    TaskSpec spec = tiny_spec();
    for (std::uint64_t id = 0; id < 20; ++id) {
        Scene original = generate_scene(spec, id);
        write_scene(original, dir.file("s.txt"));
        Scene loaded = read_scene(dir.file("s.txt"));
        CHECK(loaded == original); // exact doubles via 17 significant digits
    }
}

TEST_CASE("minimal scene serializes to the documented five lines") {
    TempDir dir("minimal");
    Scene s;
    s.id = 9;
    s.group_labels = {1};
    Tracklet tr;
    tr.obs = {Vec{0.5}};
    tr.actions = {2};
    tr.bbox = {{0.25, 0.75}};
    s.persons = {tr};
    write_scene(s, dir.file("one.txt"));
    CHECK(count_lines(dir.file("one.txt")) == 5);
    CHECK(read_scene(dir.file("one.txt")) == s);
}

TEST_CASE("truncated and malformed files report the offending line") {
    TempDir dir("broken");
    Scene s = generate_scene(tiny_spec(), 1);
    write_scene(s, dir.file("s.txt"));

    // drop the last line
    std::ifstream in(dir.file("s.txt"));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    std::ofstream out(dir.file("cut.txt"));
    for (std::size_t i = 0; i + 1 < lines.size(); ++i) out << lines[i] << '\n';
    out.close();
    try {
        read_scene(dir.file("cut.txt"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line_number == lines.size());
    }

    std::ofstream bad(dir.file("bad.txt"));
    bad << "GARSCENE 1\n0 1 1 1 0\nnot_a_number\n";
    bad.close();
    CHECK_THROWS_AS(read_scene(dir.file("bad.txt")), ParseError);

    std::ofstream wrong(dir.file("wrong.txt"));
    wrong << "SOMETHINGELSE 1\n";
    wrong.close();
    CHECK_THROWS_AS(read_scene(dir.file("wrong.txt")), ParseError);

    std::ofstream vsn(dir.file("vsn.txt"));
    vsn << "GARSCENE 99\n";
    vsn.close();
    CHECK_THROWS_AS(read_scene(dir.file("vsn.txt")), ParseError);
}

TEST_CASE("dataset directory round trip with manifest") {
    TempDir dir("full");
    TaskSpec spec = tiny_spec();
    Dataset ds = generate_dataset(spec, 6, 3);
    write_dataset(ds, spec, dir.str());

    LoadedDataset loaded = load_dataset(dir.str());
    CHECK(loaded.manifest.num_actions() == 3);
    CHECK(loaded.manifest.num_activities() == 3);
    CHECK(loaded.manifest.obs_dim == 4);
    REQUIRE(loaded.train.size() == 6);
    REQUIRE(loaded.test.size() == 3);
    CHECK(loaded.train == ds.train);
    CHECK(loaded.test == ds.test);
}

TEST_CASE("validator accepts what the writer emits") {
    TempDir dir("fuzz");
    TaskSpec spec = tiny_spec();
    Dataset ds = generate_dataset(spec, 12, 5);
    write_dataset(ds, spec, dir.str());

    ValidationReport rep = validate_dataset(dir.str());
    CHECK(rep.ok());
    CHECK(rep.train_scenes == 12);
    CHECK(rep.test_scenes == 5);

    // counts match an independent recount
    std::vector<std::size_t> activity(3, 0), action(3, 0);
    for (const auto& split : {ds.train, ds.test}) {
        for (const Scene& s : split) {
            for (std::size_t g : s.group_labels) activity[g]++;
            for (const Tracklet& tr : s.persons) {
                for (std::size_t a : tr.actions) action[a]++;
            }
        }
    }
    CHECK(rep.activity_counts == activity);
    CHECK(rep.action_counts == action);
}

TEST_CASE("validator reports label and dimension problems") {
    TempDir dir("invalid");
    TaskSpec spec = tiny_spec();
    Dataset ds = generate_dataset(spec, 2, 1);
    // corrupt one scene's labels beyond the manifest's label space
    ds.train[0].group_labels[0] = 99;
    write_dataset(ds, spec, dir.str());

    ValidationReport rep = validate_dataset(dir.str());
    CHECK(!rep.ok());
    REQUIRE(!rep.errors.empty());
    CHECK(rep.errors[0].find("out of range") != std::string::npos);
    // validation continues past the bad scene
    CHECK(rep.train_scenes + rep.test_scenes == 2);
}

TEST_CASE("empty manifest is an error") {
    TempDir dir("empty");
    DatasetManifest m;
    m.action_names = {"a"};
    m.activity_names = {"g"};
    m.obs_dim = 2;
    write_manifest(m, dir.file("manifest.txt"));
    ValidationReport rep = validate_dataset(dir.str());
    CHECK(!rep.ok());
    CHECK(rep.errors[0].find("no scenes") != std::string::npos);
}

TEST_CASE("manifest rejects duplicate names") {
    TempDir dir("dup");
    TaskSpec spec = tiny_spec();
    Dataset ds = generate_dataset(spec, 1, 1);
    write_dataset(ds, spec, dir.str());

    DatasetManifest m = read_manifest(dir.file("manifest.txt"));
    m.action_names = {"same", "same", "other"};
    write_manifest(m, dir.file("manifest.txt"));
    ValidationReport rep = validate_dataset(dir.str());
    CHECK(!rep.ok());
    CHECK(rep.errors[0].find("duplicate") != std::string::npos);
}

TEST_SUITE_END();
