//! Nearest-neighbor stability of word embeddings.
//!
//! Load several embedding spaces trained on the same corpus, find each word's
//! exact top-k cosine neighbors in every space, and measure how much those
//! neighbor lists overlap. Around that core sit frequency-bucket and
//! best-method summaries, parameter sweeps, shared-nearest-neighbor density
//! clustering with a cross-run agreement score, and WEAT bias effect sizes.
//!
//! ```
//! use embstab_core::{pair_stability, top_k_all, EmbeddingSpace};
//!
//! let a = EmbeddingSpace::from_rows("a", vec![
//!     ("cat", vec![1.0, 0.0]),
//!     ("dog", vec![0.9, 0.1]),
//!     ("car", vec![0.0, 1.0]),
//! ]).unwrap();
//! let b = EmbeddingSpace::from_rows("b", vec![
//!     ("cat", vec![0.0, 1.0]),
//!     ("dog", vec![0.1, 0.9]),
//!     ("car", vec![1.0, 0.0]),
//! ]).unwrap();
//! let vocab = vec!["car".to_string(), "cat".to_string(), "dog".to_string()];
//! let ta = top_k_all(&a, &vocab, 1).unwrap();
//! let tb = top_k_all(&b, &vocab, 1).unwrap();
//! let report = pair_stability(&ta, &tb).unwrap();
//! assert_eq!(report.per_word["cat"], 1.0);
//! ```

pub mod error;
pub mod knn;
pub mod numeric;
pub mod preprocess;
pub mod report;
pub mod snnd;
pub mod space;
pub mod stability;
pub mod sweep;
pub mod weat;

pub use error::{Error, Result};
pub use knn::{cosine, load_neighbor_cache, normalize, save_neighbor_cache, top_k_all, top_k_all_cached, NeighborTable};
pub use preprocess::{corpus_preprocess, load_frequencies, preprocess_text, CorpusStats, Stopwords};
pub use report::{emit_table, AgreementCurve, CsvTable, PairTable, SweepPairTable};
pub use snnd::{
    agreement_curve, build_snn_graph, clustering_agreement, snn_similarity, snnd_cluster, Clustering, Role, SnnGraph,
    SnndParams,
};
pub use space::{
    average_spaces, intersect_vocab, load_space, load_space_auto, open_space, save_space, EmbeddingSpace, SpaceFormat,
    SpaceMetadata,
};
pub use stability::{
    best_method_share, frequency_buckets, multi_space_stability, pair_stability, word_stability, BestMethodShare, Bucket,
    FrequencyBucketReport, MultiSpaceMode, StabilityReport,
};
pub use sweep::{run_sweep, Axis, SweepRow, SweepSpec, SweepTable};
pub use weat::{association, effect_size, weat_stability, WeatQuery, WeatResult, WeatStability};
