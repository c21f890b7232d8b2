pub mod assert_amp;
pub mod config;
pub mod input_amp;
pub mod mutation;
pub mod orchestrator;
pub mod runner;
pub mod selection;
mod syntax;
pub mod test_model;
pub mod postprocess;
pub mod profiler;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/host-language.md")]
    mod host_language {}
    #[doc = include_str!("../../../book/src/profiling.md")]
    mod profiling {}
    #[doc = include_str!("../../../book/src/input-amplification.md")]
    mod input_amplification {}
    #[doc = include_str!("../../../book/src/assertion-amplification.md")]
    mod assertion_amplification {}
    #[doc = include_str!("../../../book/src/mutation-analysis.md")]
    mod mutation_analysis {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
