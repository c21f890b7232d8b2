//! Kernel classes every image starts with.

pub(crate) const PRELUDE: &str = r#"
nil subclass: Object [
    initialize [ ]
]

Object subclass: Boolean [ ]
Object subclass: UndefinedObject [ ]
Object subclass: Magnitude [ ]
Magnitude subclass: Number [ ]
Number subclass: Integer [
    factorial [
        self < 0 ifTrue: [ ^ ArithmeticError signal: 'factorial of a negative number' ].
        self = 0 ifTrue: [ ^ 1 ].
        ^ self * (self - 1) factorial
    ]
    gcd: other [
        | a b t |
        a := self abs. b := other abs.
        [ b = 0 ] whileFalse: [ t := b. b := a \\ b. a := t ].
        ^ a
    ]
    isPrime [
        | i |
        self < 2 ifTrue: [ ^ false ].
        i := 2.
        [ i * i <= self ] whileTrue: [ self \\ i = 0 ifTrue: [ ^ false ]. i := i + 1 ].
        ^ true
    ]
]
Number subclass: Float [ ]
Object subclass: Collection [ ]
Collection subclass: String [ ]
String subclass: Symbol [ ]
Collection subclass: Array [ ]
Collection subclass: OrderedCollection [ ]
Collection subclass: Dictionary [ ]
Object subclass: BlockClosure [ ]
Object subclass: Class [ ]
Object subclass: Clock [
    Clock class >> now [ <primitive: 'clockNow'> ]
]

Object subclass: Exception [
    | messageText |
    Exception class >> signal [ ^ self new signal ]
    Exception class >> signal: aString [ ^ self new signal: aString ]
    Exception class >> new [ <primitive: 'basicNew'> ]
    messageText [ ^ messageText ifNil: [ self class name ] ]
    messageText: aString [ messageText := aString ]
    description [ ^ self messageText ]
    signal [ <primitive: 'signal'> ]
    signal: aString [ messageText := aString. ^ self signal ]
    pass [ ^ self signal ]
    return: aValue [ <primitive: 'exReturn'> ]
    return [ ^ self return: nil ]
]
Exception subclass: Error [ ]
Error subclass: ZeroDivide [ ]
Error subclass: MessageNotUnderstood [ ]
Error subclass: SubscriptOutOfBounds [ ]
Error subclass: KeyNotFound [ ]
Error subclass: NotFound [ ]
Error subclass: CollectionIsEmpty [ ]
Error subclass: ArithmeticError [ ]
Error subclass: WrongArgumentCount [ ]
Error subclass: UndeclaredVariable [ ]
Error subclass: NonBooleanReceiver [ ]
Error subclass: ShouldNotImplement [ ]
Exception subclass: TestFailure [ ]

Object subclass: TestCase [
    setUp [ ]
    tearDown [ ]
    assert: aBoolean [
        aBoolean == true ifFalse: [ ^ TestFailure signal: 'Assertion failed' ]
    ]
    assert: aBoolean description: aString [
        aBoolean == true ifFalse: [ ^ TestFailure signal: aString ]
    ]
    deny: aBoolean [
        aBoolean == false ifFalse: [ ^ TestFailure signal: 'Denial failed' ]
    ]
    deny: aBoolean description: aString [
        aBoolean == false ifFalse: [ ^ TestFailure signal: aString ]
    ]
    assert: actual equals: expected [
        actual = expected ifFalse: [
            ^ TestFailure signal: 'Expected ', expected printString, ' but was ', actual printString ]
    ]
    deny: actual equals: expected [
        actual = expected ifTrue: [
            ^ TestFailure signal: 'Did not expect ', expected printString ]
    ]
    should: aBlock raise: anExceptionClass [
        | raised |
        raised := false.
        aBlock on: anExceptionClass do: [ :ex | raised := true ].
        raised ifFalse: [ ^ TestFailure signal: 'Expected ', anExceptionClass name, ' to be raised' ]
    ]
    shouldnt: aBlock raise: anExceptionClass [
        aBlock on: anExceptionClass do: [ :ex | ^ TestFailure signal: 'Unexpected ', ex class name ]
    ]
    fail [ ^ TestFailure signal: 'Test failed' ]

    observe: anObject at: aPoint [ <primitive: 'hook:observe'> ]
    observeRetVal: anObject at: aPoint [ <primitive: 'hook:observeRetVal'> ]
    observeException: anException at: aPoint [ <primitive: 'hook:observeException'> ]
    profileVar: aName at: aPoint value: anObject [ <primitive: 'hook:profileVar'> ]
    markFailedAssertion: anId [ <primitive: 'hook:markFailedAssertion'> ]
]
"#;
