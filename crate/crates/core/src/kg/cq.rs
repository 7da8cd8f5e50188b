//! The shipped competency questions.

use super::query::{Query, QueryError};

pub struct CompetencyQuestion {
    pub number: u8,
    pub question: &'static str,
    pub pattern: &'static str,
}

pub const COMPETENCY_QUESTIONS: [CompetencyQuestion; 5] = [
    CompetencyQuestion {
        number: 1,
        question: "Which objects are breakfast food, hold breakfast food, or are used to eat it?",
        pattern: include_str!("../../data/cq/cq1.query"),
    },
    CompetencyQuestion {
        number: 2,
        question: "Where does each food item belong?",
        pattern: include_str!("../../data/cq/cq2.query"),
    },
    CompetencyQuestion {
        number: 3,
        question: "Where should a given tool ($TOOL) be?",
        pattern: include_str!("../../data/cq/cq3.query"),
    },
    CompetencyQuestion {
        number: 4,
        question: "Which objects can be grasped, directly or by a part?",
        pattern: include_str!("../../data/cq/cq4.query"),
    },
    CompetencyQuestion {
        number: 5,
        question: "Where can things be set down?",
        pattern: include_str!("../../data/cq/cq5.query"),
    },
];

/// Parsed pattern of question `n` (1 to 5).
pub fn competency_question(n: u8) -> Option<Result<Query, QueryError>> {
    COMPETENCY_QUESTIONS
        .iter()
        .find(|q| q.number == n)
        .map(|q| Query::parse(q.pattern))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_questions_parse() {
        for n in 1..=5 {
            let q = competency_question(n).unwrap().unwrap();
            assert!(!q.head.is_empty());
            assert_eq!(q.params().is_empty(), n != 3, "CQ{n}");
        }
        assert!(competency_question(6).is_none());
    }
}
