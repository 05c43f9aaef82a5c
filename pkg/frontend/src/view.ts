/** DOM rendering of the run view model.
 *
 * Rendering is pure: the same view model always yields the same markup.
 * Handlers are attached to dedicated hooks (data-action attributes), so
 * tests can drive the console exactly like a user would.
 */

import {
  pendingChoiceNode,
  treeChildren,
  type RunView,
  type TreeSnapshot,
} from './types.js';

export interface ViewHandlers {
  onApprove?: () => void;
  onRevise?: (critique: string) => void;
  onChoose?: (nodeId: string, optionId: string) => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderBanner(
  doc: Document,
  kind: 'error' | 'info',
  message: string,
): HTMLElement {
  const banner = el(doc, 'div', `banner banner-${kind}`, message);
  banner.setAttribute('role', kind === 'error' ? 'alert' : 'status');
  return banner;
}

function renderPlan(doc: Document, view: RunView): HTMLElement {
  const section = el(doc, 'section', 'plan');
  section.appendChild(el(doc, 'h2', undefined, 'Plan'));
  const plan = view.plan;
  if (!plan) {
    section.appendChild(el(doc, 'p', 'empty', 'no plan yet'));
    return section;
  }
  section.appendChild(
    el(doc, 'p', 'plan-status', `${plan.plan_id} — ${plan.status}`),
  );
  const list = el(doc, 'ol', 'steps');
  for (const step of plan.steps) {
    const item = el(doc, 'li', `step step-${step.status}`);
    item.dataset.stepId = step.step_id;
    item.appendChild(el(doc, 'span', 'step-desc', step.description));
    item.appendChild(el(doc, 'span', 'step-state', ` [${step.status}]`));
    if (step.result !== null) {
      item.appendChild(el(doc, 'span', 'step-result', ` → ${step.result}`));
    }
    list.appendChild(item);
  }
  section.appendChild(list);
  return section;
}

function renderTreeNodes(
  doc: Document,
  tree: TreeSnapshot,
  nodeId: string,
  view: RunView,
  handlers: ViewHandlers,
): HTMLElement {
  const list = el(doc, 'ul', 'tree-level');
  for (const child of treeChildren(tree, nodeId)) {
    const item = el(doc, 'li', child.chosen ? 'option chosen' : 'option');
    item.dataset.nodeId = child.node_id;
    item.appendChild(el(doc, 'span', 'option-desc', child.description));
    if (child.rationale) {
      item.appendChild(el(doc, 'span', 'option-why', ` (${child.rationale})`));
    }
    const pending = view.pendingAction === 'choice'
      ? pendingChoiceNode(tree)
      : null;
    if (pending && child.parent === pending.node_id) {
      const button = el(doc, 'button', 'choose', 'choose');
      button.dataset.action = 'choose';
      button.dataset.nodeId = pending.node_id;
      button.dataset.optionId = child.node_id;
      button.addEventListener('click', () =>
        handlers.onChoose?.(pending.node_id, child.node_id),
      );
      item.appendChild(button);
    }
    item.appendChild(renderTreeNodes(doc, tree, child.node_id, view, handlers));
    list.appendChild(item);
  }
  return list;
}

function renderTree(
  doc: Document,
  view: RunView,
  handlers: ViewHandlers,
): HTMLElement {
  const section = el(doc, 'section', 'tree');
  section.appendChild(el(doc, 'h2', undefined, 'Plan options'));
  const tree = view.tree;
  const root = tree?.nodes.find((node) => node.parent === null);
  if (!tree || !root) {
    section.appendChild(el(doc, 'p', 'empty', 'no tree'));
    return section;
  }
  section.appendChild(renderTreeNodes(doc, tree, root.node_id, view, handlers));
  return section;
}

function renderFeedbackForm(
  doc: Document,
  handlers: ViewHandlers,
): HTMLElement {
  const form = el(doc, 'div', 'feedback');
  form.appendChild(el(doc, 'h2', undefined, 'Review the plan'));
  const approve = el(doc, 'button', 'approve', 'approve');
  approve.dataset.action = 'approve';
  approve.addEventListener('click', () => handlers.onApprove?.());
  form.appendChild(approve);

  const critique = el(doc, 'input', 'critique');
  critique.setAttribute('placeholder', 's1=needs detail');
  critique.dataset.field = 'critique';
  form.appendChild(critique);

  const revise = el(doc, 'button', 'revise', 'request changes');
  revise.dataset.action = 'revise';
  revise.addEventListener('click', () =>
    handlers.onRevise?.(critique.value),
  );
  form.appendChild(revise);
  return form;
}

function renderEvents(doc: Document, view: RunView): HTMLElement {
  const section = el(doc, 'section', 'events');
  section.appendChild(el(doc, 'h2', undefined, 'Events'));
  const list = el(doc, 'ul', 'event-feed');
  for (const event of view.events) {
    list.appendChild(
      el(doc, 'li', `event event-${event.event_type}`,
         `#${event.seq} ${event.event_type} (${event.actor_id})`),
    );
  }
  section.appendChild(list);
  return section;
}

export function renderRunView(
  doc: Document,
  view: RunView,
  handlers: ViewHandlers = {},
): HTMLElement {
  const root = el(doc, 'div', `run run-${view.status}`);
  root.dataset.runId = view.runId;
  root.dataset.status = view.status;

  const header = el(doc, 'header');
  header.appendChild(el(doc, 'h1', undefined, view.runId));
  header.appendChild(el(doc, 'span', 'status', view.status));
  root.appendChild(header);

  if (view.error) {
    root.appendChild(renderBanner(doc, 'error', view.error));
  }
  if (view.goal) {
    root.appendChild(
      el(doc, 'p', 'goal',
         `${view.goal.description} (${view.goal.origin})`),
    );
  }

  // A finished linear plan replaces the option tree in the main column.
  if (view.tree && !(view.plan && view.pendingAction !== 'choice')) {
    root.appendChild(renderTree(doc, view, handlers));
  }
  if (view.plan || !view.tree) {
    root.appendChild(renderPlan(doc, view));
  }
  if (view.pendingAction === 'feedback') {
    root.appendChild(renderFeedbackForm(doc, handlers));
  }
  if (view.finalAnswer !== null) {
    const answer = el(doc, 'p', 'final-answer', view.finalAnswer);
    answer.dataset.field = 'final-answer';
    root.appendChild(answer);
  }
  root.appendChild(renderEvents(doc, view));
  return root;
}
