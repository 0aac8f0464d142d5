//! Truthful, honest and undeluded over simulated traces, including a deluded
//! agent that is honest but not truthful.

use truthcert::seed::stream;
use truthcert::statement::ConversationId;
use truthcert::world::{
    check_honest, check_truthful, check_undeluded, simulate_trace, AgentModel, AgentPolicy, PayoffTable, Prompt,
    WorldModel,
};

fn main() {
    let world = WorldModel::from_truths((0..12).map(|i| (format!("fact{i}"), i % 3 != 0)));
    let prompts: Vec<Prompt> = world.propositions().map(|p| Prompt::ask(p.clone())).collect();

    let mut deluded = AgentPolicy::always_truthful();
    deluded.delusion_map.insert("fact4".into());
    let mut payoffs = PayoffTable::default();
    payoffs.set("fact1", false, 1.0);
    let agents = [
        AgentModel::from_world("plain", AgentPolicy::always_truthful(), &world),
        AgentModel::from_world("deluded", deluded, &world),
        AgentModel::from_world("liar", AgentPolicy::strategic(20.0), &world).with_payoffs(payoffs),
    ];

    println!("{:<8} {:>8} {:>6} {:>9}", "agent", "truthful", "honest", "undeluded");
    for agent in &agents {
        let mut rng = stream(1, &format!("predicates/{}", agent.id));
        let trace = simulate_trace(agent, &prompts, &world, &mut rng, &ConversationId::from("c"), 1)
            .expect("prompts come from the world");
        let t = check_truthful(&trace, &world);
        let h = check_honest(&trace);
        let u = check_undeluded(&agent.beliefs, &world);
        println!("{:<8} {:>8} {:>6} {:>9}", agent.id, t.holds(), h.holds(), u.holds());
        assert!(!(h.holds() && u.holds()) || t.holds());
    }
}
