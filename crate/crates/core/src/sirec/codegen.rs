//! C++ export of a trained ensemble.
//!
//! The emitted unit needs only `<stdint.h>` and `<math.h>`, keeps every
//! buffer on the stack and reproduces the host's arithmetic step by step, so
//! predictions agree bit for bit when the target has IEEE doubles and the
//! compiler does not contract multiply-adds.

use std::fmt::Write;

use super::model::SirecModel;
use super::tree::Node;

const LEAF_FLAG: u32 = 0x8000_0000;

struct Flat {
    roots: Vec<u32>,
    feature: Vec<usize>,
    threshold: Vec<f32>,
    left: Vec<u32>,
    right: Vec<u32>,
}

fn flatten(model: &SirecModel) -> Flat {
    let mut flat = Flat {
        roots: Vec::new(),
        feature: Vec::new(),
        threshold: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
    };
    let class_index = |label: i32| model.classes().binary_search(&label).expect("declared class") as u32;
    for t in model.trees() {
        let nodes = t.tree.nodes();
        // Global slot for every split node of this tree, in preorder.
        let base = flat.feature.len() as u32;
        let mut slot = vec![0u32; nodes.len()];
        let mut next = base;
        for (i, n) in nodes.iter().enumerate() {
            if let Node::Split { .. } = n {
                slot[i] = next;
                next += 1;
            }
        }
        let code = |i: usize| match nodes[i] {
            Node::Leaf { label } => LEAF_FLAG | class_index(label),
            Node::Split { .. } => slot[i],
        };
        flat.roots.push(code(0));
        for n in nodes {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = *n
            {
                flat.feature.push(feature);
                flat.threshold.push(threshold);
                flat.left.push(code(left));
                flat.right.push(code(right));
            }
        }
    }
    flat
}

fn c_float(v: f32) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e']) {
        format!("{s}f")
    } else {
        format!("{s}.0f")
    }
}

fn array<T>(out: &mut String, ty: &str, name: &str, values: &[T], fmt: impl Fn(&T) -> String) {
    // C++ has no zero-length arrays; an unused placeholder keeps it valid.
    let items: Vec<String> = if values.is_empty() {
        vec!["0".into()]
    } else {
        values.iter().map(fmt).collect()
    };
    writeln!(out, "static const {ty} {name}[{}] = {{", items.len()).unwrap();
    for chunk in items.chunks(8) {
        writeln!(out, "    {},", chunk.join(", ")).unwrap();
    }
    out.push_str("};\n");
}

/// Emits a standalone C++11 translation unit with the entry point
/// `int32_t sirec_predict(const float* rir)`, where `rir` holds at least
/// `SIREC_SEGMENT_LENGTH` samples.
pub fn export_portable_source(model: &SirecModel) -> String {
    let cfg = model.config();
    let flat = flatten(model);
    let fft_lens: Vec<usize> = model.trees().iter().map(|t| t.pair.padded_len()).collect();
    let max_fft = fft_lens.iter().copied().max().unwrap_or(2);
    let classes: Vec<String> = model.classes().iter().map(i32::to_string).collect();

    let mut s = String::new();
    writeln!(
        s,
        "// SIREC ensemble: {} trees over the first {} RIR samples, classes {{{}}}.",
        cfg.n_estimators,
        cfg.segment_length,
        classes.join(", ")
    )
    .unwrap();
    writeln!(
        s,
        "// Generated by sirec-core {}. Build with -ffp-contract=off for bit-exact parity.",
        env!("CARGO_PKG_VERSION")
    )
    .unwrap();
    s.push_str("#include <stdint.h>\n#include <math.h>\n\n");
    writeln!(s, "#define SIREC_SEGMENT_LENGTH {}", cfg.segment_length).unwrap();
    writeln!(s, "#define SIREC_TREE_COUNT {}", cfg.n_estimators).unwrap();
    writeln!(s, "#define SIREC_CLASS_COUNT {}", model.classes().len()).unwrap();
    writeln!(s, "#define SIREC_MAX_FFT {max_fft}").unwrap();
    s.push_str("#define SIREC_LEAF 0x80000000u\n\n");
    s.push_str("static const double sirec_pi = 3.141592653589793;\n\n");

    array(&mut s, "int32_t", "sirec_classes", model.classes(), |c| c.to_string());
    let pairs = model.trees();
    array(&mut s, "uint32_t", "sirec_rnd_start", pairs, |t| {
        t.pair.rnd_start.to_string()
    });
    array(&mut s, "uint32_t", "sirec_length", pairs, |t| t.pair.length.to_string());
    array(&mut s, "uint32_t", "sirec_fft_len", &fft_lens, |n| n.to_string());
    let hex = |c: &u32| format!("0x{c:08x}u");
    array(&mut s, "uint32_t", "sirec_root", &flat.roots, hex);
    s.push_str("\n// Split nodes; a child with SIREC_LEAF set is a leaf holding a class index.\n");
    array(&mut s, "uint8_t", "sirec_feature", &flat.feature, |f| f.to_string());
    array(&mut s, "float", "sirec_threshold", &flat.threshold, |t| c_float(*t));
    array(&mut s, "uint32_t", "sirec_left", &flat.left, hex);
    array(&mut s, "uint32_t", "sirec_right", &flat.right, hex);
    s.push_str(RUNTIME);
    s
}

const RUNTIME: &str = r#"
static void sirec_fft(double* re, double* im, uint32_t n) {
    uint32_t bits = 0;
    while ((1u << bits) < n) {
        ++bits;
    }
    for (uint32_t i = 0; i < n; ++i) {
        uint32_t j = 0;
        for (uint32_t b = 0; b < bits; ++b) {
            if (i & (1u << b)) {
                j |= 1u << (bits - 1 - b);
            }
        }
        if (i < j) {
            double t = re[i]; re[i] = re[j]; re[j] = t;
            t = im[i]; im[i] = im[j]; im[j] = t;
        }
    }
    for (uint32_t half = 1; half < n; half *= 2) {
        uint32_t stride = n / (2 * half);
        for (uint32_t start = 0; start < n; start += 2 * half) {
            for (uint32_t k = 0; k < half; ++k) {
                double angle = -2.0 * sirec_pi * (double)(k * stride) / (double)n;
                double wr = cos(angle);
                double wi = sin(angle);
                uint32_t a = start + k;
                uint32_t b = a + half;
                double odd_re = re[b] * wr - im[b] * wi;
                double odd_im = re[b] * wi + im[b] * wr;
                double even_re = re[a];
                double even_im = im[a];
                re[a] = even_re + odd_re;
                im[a] = even_im + odd_im;
                re[b] = even_re - odd_re;
                im[b] = even_im - odd_im;
            }
        }
    }
}

// Smallest over largest magnitude of bins 1..n/2 of the zero-padded interval.
static double sirec_spectral_ratio(const float* x, uint32_t len, uint32_t n) {
    double re[SIREC_MAX_FFT];
    double im[SIREC_MAX_FFT];
    for (uint32_t i = 0; i < n; ++i) {
        re[i] = i < len ? (double)x[i] : 0.0;
        im[i] = 0.0;
    }
    sirec_fft(re, im, n);
    double lo = HUGE_VAL;
    double hi = 0.0;
    for (uint32_t k = 1; k <= n / 2; ++k) {
        double m = hypot(re[k], im[k]);
        lo = fmin(lo, m);
        hi = fmax(hi, m);
    }
    if (!(hi > 0.0)) {
        return 0.0;
    }
    double r = lo / hi;
    return r < 0.0 ? 0.0 : (r > 1.0 ? 1.0 : r);
}

static void sirec_diff_stats(const float* x, uint32_t len, double* mean, double* std_dev) {
    double sum = -0.0;
    for (uint32_t i = 0; i + 1 < len; ++i) {
        sum += (double)x[i] - (double)x[i + 1];
    }
    double m = sum / (double)(len - 1);
    double ss = -0.0;
    for (uint32_t i = 0; i + 1 < len; ++i) {
        double d = (double)x[i] - (double)x[i + 1] - m;
        ss += d * d;
    }
    *mean = m;
    *std_dev = sqrt(ss / (double)(len - 1));
}

static uint32_t sirec_walk(uint32_t node, const double* f) {
    while (!(node & SIREC_LEAF)) {
        node = f[sirec_feature[node]] <= (double)sirec_threshold[node] ? sirec_left[node] : sirec_right[node];
    }
    return node & ~SIREC_LEAF;
}

// Class index voted by tree t.
uint32_t sirec_tree_vote(const float* rir, uint32_t t) {
    double f[3];
    f[0] = sirec_spectral_ratio(rir + sirec_rnd_start[t], sirec_length[t], sirec_fft_len[t]);
    sirec_diff_stats(rir, sirec_length[t], &f[1], &f[2]);
    return sirec_walk(sirec_root[t], f);
}

int32_t sirec_predict(const float* rir) {
    uint32_t votes[SIREC_CLASS_COUNT];
    for (uint32_t c = 0; c < SIREC_CLASS_COUNT; ++c) {
        votes[c] = 0;
    }
    for (uint32_t t = 0; t < SIREC_TREE_COUNT; ++t) {
        ++votes[sirec_tree_vote(rir, t)];
    }
    uint32_t best = 0;
    for (uint32_t c = 1; c < SIREC_CLASS_COUNT; ++c) {
        if (votes[c] > votes[best]) {
            best = c;
        }
    }
    return sirec_classes[best];
}
"#;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::IntervalPair;
    use crate::sirec::{DecisionTree, ModelConfig, SirecTree};

    fn stump(threshold: f32) -> SirecModel {
        let cfg = ModelConfig {
            n_estimators: 1,
            segment_length: 16,
            min_len: 2,
            max_len: 16,
            random_state: 0,
        };
        let tree = DecisionTree::from_nodes(vec![
            Node::Split {
                feature: 2,
                threshold,
                left: 1,
                right: 2,
            },
            Node::Leaf { label: 0 },
            Node::Leaf { label: 100 },
        ])
        .unwrap();
        let trees = vec![SirecTree {
            pair: IntervalPair {
                rnd_start: 3,
                length: 10,
            },
            tree,
        }];
        SirecModel::from_parts(cfg, vec![0, 100], trees).unwrap()
    }

    fn threshold_block(src: &str) -> Vec<String> {
        let start = src.find("sirec_threshold[").unwrap();
        let body = &src[start..];
        let open = body.find('{').unwrap();
        let close = body.find("};").unwrap();
        body[open + 1..close]
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect()
    }

    #[test]
    fn stump_has_one_threshold_constant() {
        let t = 0.123_456_79_f32;
        let src = export_portable_source(&stump(t));
        let block = threshold_block(&src);
        assert_eq!(block.len(), 1);
        let parsed: f32 = block[0].trim_end_matches('f').parse().unwrap();
        assert_eq!(parsed, t);
        assert!(src.contains("sirec_threshold[1]"));
        assert!(src.contains("sirec_fft_len[1] = {\n    16,"));
        assert!(src.contains("sirec_root[1] = {\n    0x00000000u,"));
        assert!(src.contains("sirec_left[1] = {\n    0x80000000u,"));
        assert!(src.contains("sirec_right[1] = {\n    0x80000001u,"));
    }

    #[test]
    fn float_literals() {
        assert_eq!(c_float(6.0), "6.0f");
        assert_eq!(c_float(0.5), "0.5f");
        assert_eq!(c_float(-1e-7), "-1e-7f");
        assert_eq!(c_float(3e20), "3e20f");
    }

    #[test]
    fn no_allocation_or_extra_headers() {
        let src = export_portable_source(&stump(1.0));
        for banned in [
            "malloc",
            "new ",
            "delete",
            "std::",
            "#include <vector>",
            "static double sirec_buf",
        ] {
            assert!(!src.contains(banned), "{banned}");
        }
        let includes: Vec<&str> = src.lines().filter(|l| l.starts_with("#include")).collect();
        assert_eq!(includes, ["#include <stdint.h>", "#include <math.h>"]);
    }
}
