#include "gar/dataset_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "gar/detail/text_io.hpp"

namespace fs = std::filesystem;

namespace gar {

using detail::LineReader;
using detail::parse_count;
using detail::parse_real;
using detail::split_tokens;

namespace {

constexpr const char* kSceneMagic = "GARSCENE";
constexpr const char* kManifestMagic = "GARMANIFEST";
constexpr int kFormatVersion = 1;

void expect_magic(const std::string& line, const char* magic, const LineReader& r) {
    detail::expect_magic(line, magic, kFormatVersion, r);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    return in;
}

} // namespace

void write_scene(const Scene& scene, const std::string& path) {
    std::ofstream out = open_out(path);
    out << kSceneMagic << ' ' << kFormatVersion << '\n';
    out << scene.id << ' ' << scene.timesteps() << ' ' << scene.persons.size() << ' '
        << (scene.persons.empty() ? 0 : scene.persons[0].obs[0].size());
    for (std::size_t g : scene.group_labels) out << ' ' << g;
    out << '\n';
    for (const Tracklet& tr : scene.persons) {
        for (std::size_t t = 0; t < tr.actions.size(); ++t) {
            out << (t ? " " : "") << tr.actions[t];
        }
        out << '\n';
        for (std::size_t t = 0; t < tr.bbox.size(); ++t) {
            out << (t ? " " : "") << format_real(tr.bbox[t].first) << ' '
                << format_real(tr.bbox[t].second);
        }
        out << '\n';
        for (const Vec& o : tr.obs) {
            for (std::size_t j = 0; j < o.size(); ++j) out << (j ? " " : "") << format_real(o[j]);
            out << '\n';
        }
    }
}

Scene read_scene(const std::string& path) {
    std::ifstream in = open_in(path);
    LineReader r(in, fs::path(path).filename().string());
    expect_magic(r.next("magic line"), kSceneMagic, r);

    auto header = split_tokens(r.next("scene header"));
    if (header.size() < 4) throw ParseError(r.name() + ": short scene header", r.line());
    Scene scene;
    scene.id = parse_count(header[0], r, "scene id");
    const std::size_t T = parse_count(header[1], r, "timestep count");
    const std::size_t K = parse_count(header[2], r, "person count");
    const std::size_t obs_dim = parse_count(header[3], r, "obs dim");
    if (header.size() != 4 + T) {
        throw ParseError(r.name() + ": expected " + std::to_string(T) + " group labels, got " +
                         std::to_string(header.size() - 4), r.line());
    }
    for (std::size_t t = 0; t < T; ++t) {
        scene.group_labels.push_back(parse_count(header[4 + t], r, "group label"));
    }

    scene.persons.resize(K);
    for (Tracklet& tr : scene.persons) {
        auto acts = split_tokens(r.next("action labels"));
        if (acts.size() != T) {
            throw ParseError(r.name() + ": expected " + std::to_string(T) + " action labels",
                             r.line());
        }
        for (const auto& a : acts) tr.actions.push_back(parse_count(a, r, "action label"));

        auto box = split_tokens(r.next("bbox keys"));
        if (box.size() != 2 * T) {
            throw ParseError(r.name() + ": expected " + std::to_string(2 * T) + " bbox values",
                             r.line());
        }
        for (std::size_t t = 0; t < T; ++t) {
            tr.bbox.emplace_back(parse_real(box[2 * t], r), parse_real(box[2 * t + 1], r));
        }

        tr.obs.resize(T);
        for (Vec& o : tr.obs) {
            auto vals = split_tokens(r.next("observation row"));
            if (vals.size() != obs_dim) {
                throw ParseError(r.name() + ": expected " + std::to_string(obs_dim) +
                                 " observation values, got " + std::to_string(vals.size()),
                                 r.line());
            }
            o.reserve(obs_dim);
            for (const auto& v : vals) o.push_back(parse_real(v, r));
        }
    }
    return scene;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out = open_out(path);
    out << kManifestMagic << ' ' << kFormatVersion << '\n';
    out << "actions " << manifest.action_names.size();
    for (const auto& n : manifest.action_names) out << ' ' << n;
    out << '\n';
    out << "activities " << manifest.activity_names.size();
    for (const auto& n : manifest.activity_names) out << ' ' << n;
    out << '\n';
    out << "obs_dim " << manifest.obs_dim << '\n';
    for (const auto& e : manifest.scenes) out << "scene " << e.split << ' ' << e.file << '\n';
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in = open_in(path);
    LineReader r(in, fs::path(path).filename().string());
    expect_magic(r.next("magic line"), kManifestMagic, r);

    DatasetManifest m;
    auto read_names = [&](const char* key) {
        auto toks = split_tokens(r.next(key));
        if (toks.size() < 2 || toks[0] != key) {
            throw ParseError(r.name() + ": expected '" + key + " <n> <names...>'", r.line());
        }
        std::size_t n = parse_count(toks[1], r, "name count");
        if (toks.size() != 2 + n) {
            throw ParseError(r.name() + ": expected " + std::to_string(n) + " names", r.line());
        }
        return std::vector<std::string>(toks.begin() + 2, toks.end());
    };
    m.action_names = read_names("actions");
    m.activity_names = read_names("activities");

    auto dim = split_tokens(r.next("obs_dim"));
    if (dim.size() != 2 || dim[0] != "obs_dim") {
        throw ParseError(r.name() + ": expected 'obs_dim <d>'", r.line());
    }
    m.obs_dim = parse_count(dim[1], r, "obs dim");

    std::string line;
    std::size_t line_no = r.line();
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto toks = split_tokens(line);
        if (toks.size() != 3 || toks[0] != "scene" ||
            (toks[1] != "train" && toks[1] != "test")) {
            throw ParseError(r.name() + ": expected 'scene <train|test> <file>'", line_no);
        }
        m.scenes.push_back({toks[1], toks[2]});
    }
    return m;
}

void write_dataset(const Dataset& ds, const TaskSpec& spec, const std::string& dir) {
    fs::create_directories(dir);
    DatasetManifest m;
    m.action_names = action_names(spec);
    m.activity_names = activity_names(spec);
    m.obs_dim = spec.obs_dim;
    auto emit = [&](const Scene& s, const char* split) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%05llu.txt",
                      static_cast<unsigned long long>(s.id));
        write_scene(s, (fs::path(dir) / name).string());
        m.scenes.push_back({split, name});
    };
    for (const Scene& s : ds.train) emit(s, "train");
    for (const Scene& s : ds.test) emit(s, "test");
    write_manifest(m, (fs::path(dir) / "manifest.txt").string());
}

LoadedDataset load_dataset(const std::string& dir) {
    LoadedDataset out;
    out.manifest = read_manifest((fs::path(dir) / "manifest.txt").string());
    for (const auto& e : out.manifest.scenes) {
        Scene s = read_scene((fs::path(dir) / e.file).string());
        (e.split == "train" ? out.train : out.test).push_back(std::move(s));
    }
    return out;
}

ValidationReport validate_dataset(const std::string& dir) {
    ValidationReport rep;
    DatasetManifest m;
    try {
        m = read_manifest((fs::path(dir) / "manifest.txt").string());
    } catch (const Error& e) {
        rep.errors.push_back(e.what());
        return rep;
    }

    rep.activity_counts.assign(m.num_activities(), 0);
    rep.action_counts.assign(m.num_actions(), 0);

    std::set<std::string> action_set(m.action_names.begin(), m.action_names.end());
    std::set<std::string> activity_set(m.activity_names.begin(), m.activity_names.end());
    if (action_set.size() != m.num_actions()) rep.errors.push_back("duplicate action names");
    if (activity_set.size() != m.num_activities()) {
        rep.errors.push_back("duplicate activity names");
    }
    if (m.scenes.empty()) {
        rep.errors.push_back("no scenes listed in manifest");
        return rep;
    }

    for (const auto& e : m.scenes) {
        std::string path = (fs::path(dir) / e.file).string();
        Scene s;
        try {
            s = read_scene(path);
        } catch (const Error& err) {
            rep.errors.push_back(err.what());
            continue;
        }
        bool scene_ok = true;
        auto fail = [&](const std::string& msg) {
            rep.errors.push_back(e.file + ": " + msg);
            scene_ok = false;
        };
        const std::size_t T = s.timesteps();
        if (T == 0) fail("no timesteps");
        if (s.persons.empty()) fail("no persons");
        for (std::size_t p = 0; p < s.persons.size(); ++p) {
            const Tracklet& tr = s.persons[p];
            if (tr.obs.size() != T || tr.actions.size() != T || tr.bbox.size() != T) {
                fail("person " + std::to_string(p) + " tracklet length mismatch");
                continue;
            }
            for (const Vec& o : tr.obs) {
                if (o.size() != m.obs_dim) {
                    fail("person " + std::to_string(p) + " obs dim " + std::to_string(o.size()) +
                         " != manifest " + std::to_string(m.obs_dim));
                    break;
                }
                if (!all_finite(o)) {
                    fail("person " + std::to_string(p) + " has non-finite observation");
                    break;
                }
            }
            for (std::size_t a : tr.actions) {
                if (a >= m.num_actions()) {
                    fail("action label " + std::to_string(a) + " out of range");
                    break;
                }
            }
        }
        for (std::size_t g : s.group_labels) {
            if (g >= m.num_activities()) {
                fail("activity label " + std::to_string(g) + " out of range");
                break;
            }
        }
        if (!scene_ok) continue;
        (e.split == "train" ? rep.train_scenes : rep.test_scenes)++;
        for (std::size_t g : s.group_labels) rep.activity_counts[g]++;
        for (const Tracklet& tr : s.persons) {
            for (std::size_t a : tr.actions) rep.action_counts[a]++;
        }
    }

    for (std::size_t g = 0; g < rep.activity_counts.size(); ++g) {
        if (rep.activity_counts[g] == 0) {
            rep.warnings.push_back("activity '" + m.activity_names[g] + "' never occurs");
        }
    }
    for (std::size_t a = 0; a < rep.action_counts.size(); ++a) {
        if (rep.action_counts[a] == 0) {
            rep.warnings.push_back("action '" + m.action_names[a] + "' never occurs");
        }
    }
    return rep;
}

} // namespace gar
