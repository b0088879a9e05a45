pub mod cli;
pub mod corpus;
pub mod head;
pub mod lexicon;
pub mod metrics;
pub mod phonology;
pub mod tokenizer;
pub mod vocab;
