/** Wire types of the orchestrator HTTP API and the derived view model. */

export interface StepSnapshot {
  step_id: string;
  description: string;
  depends_on: string[];
  required_capability: string | null;
  status: string;
  result: string | null;
}

export interface PlanSnapshot {
  plan_id: string;
  status: string;
  steps: StepSnapshot[];
}

export interface TreeNodeSnapshot {
  node_id: string;
  parent: string | null;
  description: string;
  rationale: string;
  chosen: boolean;
}

export interface TreeSnapshot {
  tree_id: string;
  nodes: TreeNodeSnapshot[];
}

export interface GoalSnapshot {
  goal_id: string;
  description: string;
  constraints: Record<string, string>;
  origin: string;
}

export type PendingAction = 'feedback' | 'choice' | null;

export interface RunSnapshot {
  run_id: string;
  status: string;
  stage: string;
  pending_action: PendingAction;
  goal: GoalSnapshot | null;
  plan: PlanSnapshot | null;
  tree: TreeSnapshot | null;
  final_answer: string | null;
  error: string | null;
  event_range: [number, number];
}

export interface EventRecord {
  seq: number;
  actor_id: string;
  event_type: string;
  payload: Record<string, unknown>;
  digest: string;
}

export interface RegistryEntry {
  entry_id: string;
  kind: string;
  capabilities: string[];
  price_per_call: string;
  context_window: number;
  descriptor_ref: string | null;
}

/** Pure view model: derived from API responses and nothing else. */
export interface RunView {
  runId: string;
  status: string;
  pendingAction: PendingAction;
  goal: GoalSnapshot | null;
  plan: PlanSnapshot | null;
  tree: TreeSnapshot | null;
  finalAnswer: string | null;
  error: string | null;
  events: EventRecord[];
}

export function deriveRunView(
  snapshot: RunSnapshot,
  events: EventRecord[] = [],
  eventWindow = 20,
): RunView {
  // pending_action is present iff the server says awaiting_human.
  const pendingAction =
    snapshot.status === 'awaiting_human' ? snapshot.pending_action : null;
  return {
    runId: snapshot.run_id,
    status: snapshot.status,
    pendingAction,
    goal: snapshot.goal,
    plan: snapshot.plan,
    tree: snapshot.tree,
    finalAnswer: snapshot.final_answer,
    error: snapshot.error,
    events: events.slice(-eventWindow),
  };
}

/** Children of a tree node in creation order. */
export function treeChildren(
  tree: TreeSnapshot,
  nodeId: string,
): TreeNodeSnapshot[] {
  return tree.nodes.filter((node) => node.parent === nodeId);
}

/** The node whose children currently need a choice, if any. */
export function pendingChoiceNode(tree: TreeSnapshot): TreeNodeSnapshot | null {
  let current = tree.nodes.find((node) => node.parent === null) ?? null;
  while (current) {
    const children = treeChildren(tree, current.node_id);
    if (children.length === 0) return null;
    const chosen = children.filter((child) => child.chosen);
    if (chosen.length === 1) {
      current = chosen[0];
    } else if (children.length === 1) {
      current = children[0];
    } else {
      return current;
    }
  }
  return null;
}
