//! End-to-end pipelines built on the estimator: face-image compression and
//! retrieval, and topic modeling of document-term counts.

pub mod images;
pub mod topics;

pub use images::{
    downsample_2x2, images_to_matrix, reconstruct, reconstruction_error, retrieve, GrayImage, RetrievalHit, Retriever,
};
pub use topics::{
    build_corpus, fit_topics, fit_topics_detailed, histogram_of, top_terms, top_terms_of, topic_histogram, Corpus,
    PreprocessConfig, TopicModel,
};
