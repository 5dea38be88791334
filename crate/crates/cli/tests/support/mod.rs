pub mod corpus;
pub mod golden;
