use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("item {item} out of range for m = {m}")]
    IndexOutOfRange { item: usize, m: usize },
    #[error("user {user} out of range for n = {n}")]
    UserOutOfRange { user: usize, n: usize },
    #[error("profile needs at least one user and one item (n = {n}, m = {m})")]
    EmptyProfile { n: usize, m: usize },
    #[error("bad partition: {0}")]
    BadPartition(String),
    #[error("committee size k = {k} must satisfy 1 <= k <= m = {m}")]
    BadK { k: usize, m: usize },
    #[error("item {item} has negative or non-finite score {score}")]
    NegativeScore { item: usize, score: f64 },
    #[error("external scores cover {got} items, expected {expected}")]
    IncompleteScores { expected: usize, got: usize },
    #[error("probability {value} at (user {user}, item {item}) is outside [0, 1]")]
    BadProbability {
        user: usize,
        item: usize,
        value: f64,
    },
    #[error("rule needs a group partition but the instance has none")]
    MissingGroups,
    #[error("rule needs external scores but the instance has none")]
    MissingScores,
    #[error("group of users is empty")]
    EmptyGroup,
    #[error("brute force limited to n <= {limit}, got n = {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("item {item} is approved by nobody")]
    Unapproved { item: usize },
    #[error("enumerating C({m}, {k}) subsets exceeds the budget of {budget}")]
    BudgetExceeded { m: usize, k: usize, budget: u64 },
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("bad divisibility: {0}")]
    BadDivisibility(String),
    #[error("not a permutation of 0..{m}")]
    NotPermutation { m: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
