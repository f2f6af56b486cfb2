//! Port-based teleportation and the post-selected protocols built on it.

pub mod carrier;
pub mod channel;
pub mod pgm;
pub mod post;
pub mod prepost;

pub use channel::{
    average_fidelity, channel_report, entanglement_fidelity_simulated, heralded_choi, pbt_teleport,
    ChannelReport, HeraldedOutput, PbtRun,
};
pub use pgm::{build_pgm, pbt_probabilistic, PbtChannel, Variant};
pub use post::{pbt_post_selected, post_selected_abl, post_selected_weights};
pub use carrier::{Arrival, CarrierBranch, HeraldedJoint, JointEntry};
pub use prepost::{pbt_prepost, prepost_abl, prepost_joint, prepost_oracle, prepost_step1};
