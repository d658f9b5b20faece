// Minimal virtual-node layer. Render functions build VNode trees that the
// tests inspect directly (ordering, text, focusability) and that the
// browser entry point mounts onto real DOM. No framework, no DOM needed
// for tests.

export type Handler = (value?: string) => void;

export interface VNode {
  tag: string;
  attrs: Record<string, string>;
  events: Record<string, Handler>;
  children: Child[];
}

export type Child = VNode | string;

const EVENT_PREFIX = "on";

export function h(
  tag: string,
  props: Record<string, string | Handler | undefined> = {},
  ...children: (Child | Child[] | null | undefined)[]
): VNode {
  const attrs: Record<string, string> = {};
  const events: Record<string, Handler> = {};
  for (const [key, value] of Object.entries(props)) {
    if (value === undefined) continue;
    if (key.startsWith(EVENT_PREFIX) && typeof value === "function") {
      events[key.slice(EVENT_PREFIX.length).toLowerCase()] = value;
    } else {
      attrs[key] = String(value);
    }
  }
  const flat: Child[] = [];
  for (const child of children) {
    if (child === null || child === undefined) continue;
    if (Array.isArray(child)) flat.push(...child);
    else flat.push(child);
  }
  return { tag, attrs, events, children: flat };
}

export function walk(node: VNode, visit: (n: VNode) => void): void {
  visit(node);
  for (const child of node.children) {
    if (typeof child !== "string") walk(child, visit);
  }
}

export function findAll(node: VNode, pred: (n: VNode) => boolean): VNode[] {
  const out: VNode[] = [];
  walk(node, (n) => {
    if (pred(n)) out.push(n);
  });
  return out;
}

export function byClass(node: VNode, className: string): VNode[] {
  return findAll(node, (n) =>
    (n.attrs["class"] ?? "").split(/\s+/).includes(className),
  );
}

export function textOf(node: VNode): string {
  let out = "";
  for (const child of node.children) {
    if (typeof child === "string") out += child;
    else out += textOf(child);
  }
  return out;
}

const NATIVELY_FOCUSABLE = new Set(["a", "button", "input", "select", "textarea"]);

export function isKeyboardReachable(node: VNode): boolean {
  if (node.attrs["disabled"] !== undefined) return true; // disabled controls are exempt
  if (NATIVELY_FOCUSABLE.has(node.tag)) return true;
  const tabindex = node.attrs["tabindex"];
  return tabindex !== undefined && Number(tabindex) >= 0;
}

// Browser-side mounting; tests never call this.
export function mount(node: VNode, target: Element): void {
  target.replaceChildren(realize(node));
}

function realize(node: VNode): Element {
  const el = document.createElement(node.tag);
  for (const [name, value] of Object.entries(node.attrs)) {
    el.setAttribute(name, value);
  }
  for (const [name, handler] of Object.entries(node.events)) {
    el.addEventListener(name, (event) => {
      const target = event.target as HTMLInputElement | null;
      handler(target && "value" in target ? target.value : undefined);
    });
  }
  for (const child of node.children) {
    el.append(typeof child === "string" ? document.createTextNode(child) : realize(child));
  }
  return el;
}
