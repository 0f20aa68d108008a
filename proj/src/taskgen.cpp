#include "sdr/taskgen.hpp"

#include "sdr/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

namespace sdr::taskgen {

using json = nlohmann::json;

bool is_similar(const TaskDataset& a, const TaskDataset& b) {
    return a.provenance && b.provenance && a.provenance->concept_id == b.provenance->concept_id;
}

Geometry SequenceSpec::geometry() const {
    if (mode == InputMode::Image) return Geometry{16, 16, 3};
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
    return Geometry{side, side, 1};
}

std::size_t SequenceSpec::sequence_length() const {
    return static_cast<std::size_t>(unique_sources) * static_cast<std::size_t>(replicas) + label_permuted_twins.size();
}

void SequenceSpec::validate() const {
    require(unique_sources >= static_cast<int>(kWarmStartTasks) + 1, ErrorCode::SpecInvalid,
            "SequenceSpec: need at least 4 unique sources (3 warm start + 1 streamed)");
    require(replicas >= 1, ErrorCode::SpecInvalid, "SequenceSpec: replicas must be >= 1");
    require(classes >= 2, ErrorCode::SpecInvalid, "SequenceSpec: classes must be >= 2");
    require(train_per_task >= classes && validation_per_task >= 0 && test_per_task >= 0, ErrorCode::SpecInvalid,
            "SequenceSpec: split sizes too small");
    if (mode == InputMode::Vector) {
        const Geometry g = geometry();
        require(dim >= 1 && g.flat_size() == dim, ErrorCode::SpecInvalid, "SequenceSpec: dim must be a perfect square");
    }
    for (const int k : label_permuted_twins) {
        require(k >= 1 && k <= unique_sources, ErrorCode::SpecInvalid, "SequenceSpec: twin source out of range");
    }
    require(generator.blobs_per_class >= 1 && generator.noise_rank >= 0, ErrorCode::SpecInvalid,
            "SequenceSpec: bad generator parameters");
}

namespace {

struct VectorSource {
    std::vector<std::vector<Vector>> blob_centres;  // [class][blob]
    Matrix mixing;                                  // d x rank
};

VectorSource make_vector_source(const SequenceSpec& spec, Rng rng) {
    const int d = spec.dim;
    const auto& g = spec.generator;
    VectorSource src;
    Vector centre(d);
    for (int i = 0; i < d; ++i) centre[i] = g.source_spread * rng.normal();
    src.mixing = Matrix(d, g.noise_rank);
    const double mix_scale = g.noise_rank > 0 ? g.noise_scale / std::sqrt(static_cast<double>(g.noise_rank)) : 0.0;
    for (Eigen::Index i = 0; i < src.mixing.size(); ++i) src.mixing.data()[i] = mix_scale * rng.normal();
    for (int c = 0; c < spec.classes; ++c) {
        Vector class_centre(d);
        for (int i = 0; i < d; ++i) class_centre[i] = centre[i] + g.class_spread * rng.normal();
        std::vector<Vector> blobs;
        for (int b = 0; b < g.blobs_per_class; ++b) {
            Vector blob(d);
            for (int i = 0; i < d; ++i) blob[i] = class_centre[i] + g.blob_spread * rng.normal();
            blobs.push_back(std::move(blob));
        }
        src.blob_centres.push_back(std::move(blobs));
    }
    return src;
}

struct Grating {
    double fx, fy;
    Eigen::Vector3d colour;
};

struct ImageSource {
    Eigen::Vector3d base;
    std::vector<std::vector<Grating>> gratings;  // [class][grating]
};

ImageSource make_image_source(const SequenceSpec& spec, Rng rng) {
    ImageSource src;
    for (int ch = 0; ch < 3; ++ch) src.base[ch] = 0.5 * rng.normal();
    // Each source draws its frequencies from its own band.
    const double band = 1.0 + 3.0 * rng.uniform();
    for (int c = 0; c < spec.classes; ++c) {
        std::vector<Grating> gs;
        for (int k = 0; k < 2; ++k) {
            const double angle = std::numbers::pi * rng.uniform();
            const double freq = band + 1.5 * rng.uniform();
            Grating g{freq * std::cos(angle), freq * std::sin(angle), {}};
            for (int ch = 0; ch < 3; ++ch) g.colour[ch] = rng.normal();
            gs.push_back(g);
        }
        src.gratings.push_back(std::move(gs));
    }
    return src;
}

std::vector<int> balanced_labels(int n, int classes, Rng& rng) {
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % classes;
    rng.shuffle(labels);
    return labels;
}

LabeledSet draw_vector_split(const SequenceSpec& spec, const VectorSource& src, int n, Rng& rng) {
    const int d = spec.dim;
    const auto& g = spec.generator;
    LabeledSet set{Matrix(n, d), balanced_labels(n, spec.classes, rng)};
    for (int i = 0; i < n; ++i) {
        const int label = set.y[static_cast<std::size_t>(i)];
        const auto& blobs = src.blob_centres[static_cast<std::size_t>(label)];
        Vector x = blobs[rng.uniform_index(blobs.size())];
        if (g.noise_rank > 0) {
            Vector z(g.noise_rank);
            for (int r = 0; r < g.noise_rank; ++r) z[r] = rng.normal();
            x += src.mixing * z;
        }
        for (int k = 0; k < d; ++k) x[k] += g.noise_floor * rng.normal();
        set.x.row(i) = x.transpose();
    }
    return set;
}

LabeledSet draw_image_split(const SequenceSpec& spec, const ImageSource& src, int n, Rng& rng) {
    const Geometry geo = spec.geometry();
    LabeledSet set{Matrix(n, geo.flat_size()), balanced_labels(n, spec.classes, rng)};
    for (int i = 0; i < n; ++i) {
        const auto& gs = src.gratings[static_cast<std::size_t>(set.y[static_cast<std::size_t>(i)])];
        std::vector<double> phase, amp;
        for (std::size_t k = 0; k < gs.size(); ++k) {
            phase.push_back(2.0 * std::numbers::pi * rng.uniform());
            amp.push_back(1.0 + 0.2 * rng.normal());
        }
        for (int y = 0; y < geo.height; ++y)
            for (int x = 0; x < geo.width; ++x)
                for (int ch = 0; ch < 3; ++ch) {
                    double v = src.base[ch];
                    for (std::size_t k = 0; k < gs.size(); ++k) {
                        const double arg = 2.0 * std::numbers::pi * (gs[k].fx * x + gs[k].fy * y) / geo.width + phase[k];
                        v += amp[k] * gs[k].colour[ch] * std::cos(arg);
                    }
                    v += 0.3 * rng.normal();
                    set.x(i, (y * geo.width + x) * 3 + ch) = v;
                }
    }
    return set;
}

}  // namespace

void standardize(std::vector<TaskDataset>& tasks) {
    if (tasks.empty()) return;
    const Eigen::Index d = tasks.front().train.x.cols();
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(d);
    Eigen::RowVectorXd sum_sq = Eigen::RowVectorXd::Zero(d);
    double n = 0.0;
    for (const auto& t : tasks) {
        require(t.train.x.cols() == d, ErrorCode::ShapeMismatch, "standardize: dimension mismatch across tasks");
        sum += t.train.x.colwise().sum();
        n += static_cast<double>(t.train.x.rows());
    }
    const Eigen::RowVectorXd mean = sum / n;
    for (const auto& t : tasks) sum_sq += (t.train.x.rowwise() - mean).array().square().matrix().colwise().sum();
    Eigen::RowVectorXd sd = (sum_sq / n).array().sqrt();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!(sd[j] > 1e-12)) sd[j] = 1.0;
    }
    auto apply = [&](LabeledSet& s) {
        if (s.x.rows() == 0) return;
        s.x = ((s.x.rowwise() - mean).array().rowwise() / sd.array()).matrix();
    };
    for (auto& t : tasks) {
        apply(t.train);
        apply(t.validation);
        apply(t.test);
    }
}

std::vector<TaskDataset> generate_synthetic_sequence(const SequenceSpec& spec, Rng& rng) {
    spec.validate();
    const Rng base(rng.next_u64());
    const Geometry geo = spec.geometry();

    std::vector<std::pair<int, int>> order;  // (k, r); r == 0 marks a label-permuted twin
    for (int k = 1; k <= static_cast<int>(kWarmStartTasks); ++k) order.emplace_back(k, 1);
    for (int k = 1; k <= spec.unique_sources; ++k) {
        for (int r = 1; r <= spec.replicas; ++r) {
            if (r == 1 && k <= static_cast<int>(kWarmStartTasks)) continue;
            order.emplace_back(k, r);
        }
    }
    for (const int k : spec.label_permuted_twins) order.emplace_back(k, 0);

    std::vector<TaskDataset> tasks;
    int twin_index = 0;
    for (const auto& [k, r] : order) {
        const Rng source_rng = base.fork(static_cast<std::uint64_t>(k));
        // Twins are draw stream R + 1 + index so they never share rows with replicas.
        const int stream = r > 0 ? r : spec.replicas + 1 + twin_index;
        Rng draw = base.fork(1000003ULL * static_cast<std::uint64_t>(k) + static_cast<std::uint64_t>(stream));

        TaskDataset task;
        task.id = static_cast<int>(tasks.size());
        task.class_count = spec.classes;
        task.geometry = geo;
        if (spec.mode == InputMode::Vector) {
            const VectorSource src = make_vector_source(spec, source_rng);
            task.train = draw_vector_split(spec, src, spec.train_per_task, draw);
            task.validation = draw_vector_split(spec, src, spec.validation_per_task, draw);
            task.test = draw_vector_split(spec, src, spec.test_per_task, draw);
        } else {
            const ImageSource src = make_image_source(spec, source_rng);
            task.train = draw_image_split(spec, src, spec.train_per_task, draw);
            task.validation = draw_image_split(spec, src, spec.validation_per_task, draw);
            task.test = draw_image_split(spec, src, spec.test_per_task, draw);
        }
        Provenance prov{k, r, k, false};
        if (r == 0) {
            // Cyclic shift of the labels: every class moves.
            for (auto* s : {&task.train, &task.validation, &task.test}) {
                for (auto& y : s->y) y = (y + 1) % spec.classes;
            }
            prov.concept_id = spec.unique_sources + 1 + twin_index;
            prov.label_permuted = true;
            ++twin_index;
            task.name = "T" + std::to_string(k) + ".perm";
        } else {
            task.name = "T" + std::to_string(k) + "." + std::to_string(r);
        }
        task.provenance = prov;
        tasks.push_back(std::move(task));
    }
    standardize(tasks);
    return tasks;
}

std::vector<std::size_t> permutation_order(std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (count <= kWarmStartTasks) return order;
    std::vector<std::size_t> streamed(order.begin() + kWarmStartTasks, order.end());
    Rng rng(seed);
    rng.shuffle(streamed);
    std::copy(streamed.begin(), streamed.end(), order.begin() + kWarmStartTasks);
    return order;
}

std::vector<TaskDataset> permute_sequence(const std::vector<TaskDataset>& tasks, std::uint64_t seed) {
    std::vector<TaskDataset> out;
    out.reserve(tasks.size());
    for (const std::size_t i : permutation_order(tasks.size(), seed)) out.push_back(tasks[i]);
    return out;
}

// --- file datasets -------------------------------------------------------

namespace {

constexpr std::string_view kDatasetMagic = "SDRD";

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& bytes, std::size_t& pos) {
    if (bytes.size() - pos < 4) fail(ErrorCode::CorruptFile, "dataset file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
    require(data.x.rows() == static_cast<Eigen::Index>(data.y.size()), ErrorCode::ShapeMismatch,
            "write_dataset: predictor/label count mismatch");
    require(data.x.cols() == data.geometry.flat_size(), ErrorCode::ShapeMismatch,
            "write_dataset: geometry does not match predictor width");
    std::string out(kDatasetMagic);
    put_u32(out, kDatasetFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(data.y.size()));
    put_u32(out, static_cast<std::uint32_t>(data.geometry.height));
    put_u32(out, static_cast<std::uint32_t>(data.geometry.width));
    put_u32(out, static_cast<std::uint32_t>(data.geometry.channels));
    put_u32(out, static_cast<std::uint32_t>(data.class_count));
    for (Eigen::Index i = 0; i < data.x.size(); ++i) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(data.x.data()[i])));
    }
    for (const int y : data.y) put_u32(out, static_cast<std::uint32_t>(y));
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) fail(ErrorCode::IoError, "cannot write " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) fail(ErrorCode::IoError, "write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    if (bytes.size() < 4 || bytes.compare(0, 4, kDatasetMagic) != 0) {
        fail(ErrorCode::CorruptFile, "bad dataset magic in " + path.string());
    }
    std::size_t pos = 4;
    const std::uint32_t version = get_u32(bytes, pos);
    if (version != kDatasetFormatVersion) {
        fail(ErrorCode::VersionMismatch, "dataset version " + std::to_string(version) + " in " + path.string());
    }
    Dataset data;
    const std::uint32_t n = get_u32(bytes, pos);
    data.geometry.height = static_cast<int>(get_u32(bytes, pos));
    data.geometry.width = static_cast<int>(get_u32(bytes, pos));
    data.geometry.channels = static_cast<int>(get_u32(bytes, pos));
    data.class_count = static_cast<int>(get_u32(bytes, pos));
    const std::size_t d = static_cast<std::size_t>(data.geometry.flat_size());
    if (bytes.size() - pos != 4 * (static_cast<std::size_t>(n) * d + n)) {
        fail(ErrorCode::CorruptFile, "dataset payload size mismatch in " + path.string());
    }
    data.x.resize(n, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < data.x.size(); ++i) data.x.data()[i] = std::bit_cast<float>(get_u32(bytes, pos));
    data.y.resize(n);
    for (auto& y : data.y) {
        y = static_cast<int>(get_u32(bytes, pos));
        require(y >= 0 && y < data.class_count, ErrorCode::CorruptFile, "dataset label out of range");
    }
    require_finite(data.x, "dataset predictors");
    return data;
}

Dataset read_csv_dataset(const std::filesystem::path& path, std::optional<Geometry> geometry) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        std::vector<double> values;
        bool numeric = true;
        for (const auto& f : fields) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(f, &used));
                if (used != f.size() && f.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
            if (!numeric) break;
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;  // header
            }
            fail(ErrorCode::CorruptFile, "non-numeric CSV row in " + path.string());
        }
        first = false;
        require(values.size() >= 2, ErrorCode::CorruptFile, "CSV row needs a label and features");
        require(rows.empty() || values.size() - 1 == rows.front().size(), ErrorCode::CorruptFile,
                "ragged CSV rows in " + path.string());
        const double label = values.front();
        require(label >= 0 && label == std::floor(label), ErrorCode::CorruptFile, "CSV label must be a non-negative integer");
        labels.push_back(static_cast<int>(label));
        rows.emplace_back(values.begin() + 1, values.end());
    }
    require(!rows.empty(), ErrorCode::CorruptFile, "empty CSV dataset " + path.string());

    Dataset data;
    const int d = static_cast<int>(rows.front().size());
    if (geometry) {
        data.geometry = *geometry;
    } else {
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
        data.geometry = side * side == d ? Geometry{side, side, 1} : Geometry{d, 1, 1};
    }
    require(data.geometry.flat_size() == d, ErrorCode::ShapeMismatch, "CSV width does not match geometry");
    data.x.resize(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < d; ++j) data.x(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    data.y = std::move(labels);
    data.class_count = *std::max_element(data.y.begin(), data.y.end()) + 1;
    require_finite(data.x, "CSV predictors");
    return data;
}

std::vector<TaskDataset> load_file_sequence(const std::filesystem::path& manifest_path) {
    json manifest;
    try {
        std::ifstream in(manifest_path);
        if (!in) fail(ErrorCode::IoError, "cannot read " + manifest_path.string());
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::ManifestInvalid, std::string("manifest parse error: ") + e.what());
    }

    int replicas = 2;
    double f_train = 0.75, f_val = 1.0 / 12.0, f_test = 1.0 / 6.0;
    std::uint64_t seed = 0;
    std::filesystem::path data_path;
    std::vector<std::string> class_names;
    std::vector<std::vector<json>> table;
    try {
        require(manifest.is_object() && manifest.contains("data") && manifest.contains("tasks"),
                ErrorCode::ManifestInvalid, "manifest needs 'data' and 'tasks'");
        data_path = manifest.at("data").get<std::string>();
        if (data_path.is_relative()) data_path = manifest_path.parent_path() / data_path;
        replicas = manifest.value("replicas", 2);
        seed = manifest.value("seed", std::uint64_t{0});
        if (manifest.contains("class_names")) class_names = manifest.at("class_names").get<std::vector<std::string>>();
        if (manifest.contains("split")) {
            const auto& s = manifest.at("split");
            f_train = s.value("train", f_train);
            f_val = s.value("validation", f_val);
            f_test = s.value("test", f_test);
        }
        for (const auto& row : manifest.at("tasks")) table.push_back(row.get<std::vector<json>>());
    } catch (const json::exception& e) {
        fail(ErrorCode::ManifestInvalid, std::string("manifest field error: ") + e.what());
    }
    require(replicas >= 1, ErrorCode::ManifestInvalid, "manifest: replicas must be >= 1");
    require(f_train > 0 && f_val >= 0 && f_test >= 0 && std::abs(f_train + f_val + f_test - 1.0) < 1e-6,
            ErrorCode::ManifestInvalid, "manifest: split fractions must be non-negative and sum to 1");
    require(table.size() >= kWarmStartTasks, ErrorCode::ManifestInvalid, "manifest: need at least 3 tasks");

    const std::string ext = data_path.extension().string();
    const Dataset data = ext == ".csv" ? read_csv_dataset(data_path) : read_dataset(data_path);

    auto resolve = [&](const json& entry) -> int {
        if (entry.is_number_integer()) {
            const int label = entry.get<int>();
            require(label >= 0 && label < data.class_count, ErrorCode::ClassMissing,
                    "manifest: label " + std::to_string(label) + " not in dataset");
            return label;
        }
        require(entry.is_string(), ErrorCode::ManifestInvalid, "manifest: class entries must be names or labels");
        const auto name = entry.get<std::string>();
        const auto it = std::find(class_names.begin(), class_names.end(), name);
        require(it != class_names.end(), ErrorCode::ClassMissing, "manifest: unknown class '" + name + "'");
        return static_cast<int>(it - class_names.begin());
    };

    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < data.y.size(); ++i) by_label[data.y[i]].push_back(i);

    const Rng base(seed);
    std::vector<TaskDataset> canonical;  // source-major (k, r)
    for (std::size_t k = 0; k < table.size(); ++k) {
        std::vector<int> labels;
        for (const auto& entry : table[k]) labels.push_back(resolve(entry));
        require(!labels.empty(), ErrorCode::ManifestInvalid, "manifest: empty task row");

        std::vector<TaskDataset> reps(static_cast<std::size_t>(replicas));
        for (int r = 0; r < replicas; ++r) {
            auto& t = reps[static_cast<std::size_t>(r)];
            t.class_count = static_cast<int>(labels.size());
            t.geometry = data.geometry;
            t.name = "T" + std::to_string(k + 1) + "." + std::to_string(r + 1);
            t.provenance = Provenance{static_cast<int>(k) + 1, r + 1, static_cast<int>(k) + 1, false};
            for (const int label : labels) {
                t.class_names.push_back(static_cast<std::size_t>(label) < class_names.size()
                                            ? class_names[static_cast<std::size_t>(label)]
                                            : std::to_string(label));
            }
        }

        std::vector<std::vector<std::size_t>> train_idx(reps.size()), val_idx(reps.size()), test_idx(reps.size());
        std::vector<std::vector<int>> train_y(reps.size()), val_y(reps.size()), test_y(reps.size());
        for (std::size_t c = 0; c < labels.size(); ++c) {
            const auto found = by_label.find(labels[c]);
            require(found != by_label.end() && !found->second.empty(), ErrorCode::ClassMissing,
                    "manifest: class " + std::to_string(labels[c]) + " has no samples");
            std::vector<std::size_t> members = found->second;
            Rng shuffle_rng = base.fork(static_cast<std::uint64_t>(labels[c]));
            shuffle_rng.shuffle(members);
            const std::size_t per = members.size() / static_cast<std::size_t>(replicas);
            const std::size_t extra = members.size() % static_cast<std::size_t>(replicas);
            std::size_t start = 0;
            for (std::size_t r = 0; r < reps.size(); ++r) {
                const std::size_t m = per + (r == 0 ? extra : 0);
                const auto n_train = static_cast<std::size_t>(std::llround(f_train * static_cast<double>(m)));
                const auto n_val = std::min(m - n_train, static_cast<std::size_t>(std::llround(f_val * static_cast<double>(m))));
                for (std::size_t i = 0; i < m; ++i) {
                    const std::size_t idx = members[start + i];
                    if (i < n_train) {
                        train_idx[r].push_back(idx);
                        train_y[r].push_back(static_cast<int>(c));
                    } else if (i < n_train + n_val) {
                        val_idx[r].push_back(idx);
                        val_y[r].push_back(static_cast<int>(c));
                    } else {
                        test_idx[r].push_back(idx);
                        test_y[r].push_back(static_cast<int>(c));
                    }
                }
                start += m;
            }
        }
        auto build = [&](const std::vector<std::size_t>& idx, std::vector<int> y) {
            LabeledSet s{Matrix(static_cast<Eigen::Index>(idx.size()), data.x.cols()), std::move(y)};
            for (std::size_t i = 0; i < idx.size(); ++i) s.x.row(static_cast<Eigen::Index>(i)) = data.x.row(static_cast<Eigen::Index>(idx[i]));
            return s;
        };
        for (std::size_t r = 0; r < reps.size(); ++r) {
            reps[r].train = build(train_idx[r], train_y[r]);
            reps[r].validation = build(val_idx[r], val_y[r]);
            reps[r].test = build(test_idx[r], test_y[r]);
            canonical.push_back(std::move(reps[r]));
        }
    }

    // Warm-start tasks (k = 1..3, r = 1) first, then the rest in (k, r) order.
    std::vector<TaskDataset> tasks;
    const std::size_t stride = static_cast<std::size_t>(replicas);
    for (std::size_t k = 0; k < kWarmStartTasks; ++k) tasks.push_back(canonical[k * stride]);
    for (std::size_t i = 0; i < canonical.size(); ++i) {
        if (i % stride == 0 && i / stride < kWarmStartTasks) continue;
        tasks.push_back(canonical[i]);
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) tasks[i].id = static_cast<int>(i);
    standardize(tasks);
    return tasks;
}

}  // namespace sdr::taskgen
